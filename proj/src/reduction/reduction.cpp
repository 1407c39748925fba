#include "reduction/reduction.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace lidarsphere {

const char* to_string(ReductionKind kind) {
  switch (kind) {
    case ReductionKind::kPca: return "PCA";
    case ReductionKind::kMnf: return "MNF";
    case ReductionKind::kIca: return "ICA";
  }
  return "?";
}

ReductionKind parse_reduction_kind(const std::string& name) {
  std::string up = name;
  for (char& ch : up) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (up == "PCA") return ReductionKind::kPca;
  if (up == "MNF") return ReductionKind::kMnf;
  if (up == "ICA") return ReductionKind::kIca;
  throw ConfigError("unknown reduction kind '" + name + "' (expected PCA, MNF or ICA)");
}

Eigen::MatrixXd valid_pixel_matrix(const FeatureCube& cube) {
  const std::size_t n = cube.valid_count();
  const auto c = static_cast<Eigen::Index>(cube.channel_count());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), c);
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < cube.valid().size(); ++i) {
    if (!cube.valid()[i]) continue;
    for (Eigen::Index k = 0; k < c; ++k) x(row, k) = cube[static_cast<std::size_t>(k)][i];
    ++row;
  }
  return x;
}

namespace {

void check_fit_inputs(const FeatureCube& cube, std::size_t k, const char* who) {
  if (k == 0) throw InvalidArgument(std::string(who) + ": k must be positive");
  if (cube.channel_count() < k)
    throw InvalidArgument(std::string(who) + ": " + std::to_string(cube.channel_count()) + " channels cannot give " +
                          std::to_string(k) + " components");
  if (cube.valid_count() < std::max<std::size_t>(k, 2))
    throw DataError(std::string(who) + ": not enough valid pixels");
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& centered) {
  return (centered.transpose() * centered) / static_cast<double>(centered.rows() - 1);
}

// Largest-magnitude entry positive; the first such entry wins ties.
void fix_signs(Eigen::MatrixXd& cols) {
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < cols.rows(); ++i)
      if (std::fabs(cols(i, j)) > std::fabs(cols(arg, j))) arg = i;
    if (cols(arg, j) < 0) cols.col(j) *= -1.0;
  }
}

std::size_t numeric_rank(const Eigen::VectorXd& ascending_eigs) {
  const double top = ascending_eigs.maxCoeff();
  if (!(top > 0.0)) return 0;
  const double tol = top * 1e-10 * static_cast<double>(ascending_eigs.size());
  return static_cast<std::size_t>((ascending_eigs.array() > tol).count());
}

void require_rank(std::size_t rank, std::size_t k, const char* who) {
  if (rank < k)
    throw DataError(std::string(who) + ": data rank " + std::to_string(rank) + " is below the " + std::to_string(k) +
                    " requested components (achievable rank " + std::to_string(rank) + ")");
}

}  // namespace

ReductionModel pca_fit(const FeatureCube& cube, std::size_t k) {
  check_fit_inputs(cube, k, "pca_fit");
  const Eigen::MatrixXd x = valid_pixel_matrix(cube);
  ReductionModel m;
  m.kind = ReductionKind::kPca;
  m.input_channels = cube.names();
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd cov = sample_covariance(x.rowwise() - m.mean.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  require_rank(numeric_rank(es.eigenvalues()), k, "pca_fit");
  const auto c = cov.rows();
  m.components.resize(c, static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    m.components.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(c - 1 - static_cast<Eigen::Index>(j));
    m.explained.push_back(std::max(0.0, es.eigenvalues()(c - 1 - static_cast<Eigen::Index>(j))));
  }
  fix_signs(m.components);
  return m;
}

ReductionModel mnf_fit(const FeatureCube& cube, std::size_t k, double ridge) {
  check_fit_inputs(cube, k, "mnf_fit");
  if (!(ridge > 0.0)) throw InvalidArgument("mnf_fit: ridge must be positive");
  const Eigen::MatrixXd x = valid_pixel_matrix(cube);
  const auto c = static_cast<Eigen::Index>(cube.channel_count());
  ReductionModel m;
  m.kind = ReductionKind::kMnf;
  m.input_channels = cube.names();
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd cov = sample_covariance(x.rowwise() - m.mean.transpose());
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    require_rank(numeric_rank(es.eigenvalues()), k, "mnf_fit");
  }

  // Horizontal first differences between valid neighbors.
  std::vector<double> diffs;
  std::size_t pairs = 0;
  for (std::size_t r = 0; r < cube.height(); ++r) {
    for (std::size_t col = 0; col + 1 < cube.width(); ++col) {
      if (!cube.valid()(r, col) || !cube.valid()(r, col + 1)) continue;
      for (Eigen::Index ch = 0; ch < c; ++ch)
        diffs.push_back(cube[static_cast<std::size_t>(ch)](r, col + 1) - cube[static_cast<std::size_t>(ch)](r, col));
      ++pairs;
    }
  }
  if (pairs < 2) throw DataError("mnf_fit: fewer than two horizontally adjacent valid pixel pairs");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> d(
      diffs.data(), static_cast<Eigen::Index>(pairs), c);
  const Eigen::RowVectorXd dmean = d.colwise().mean();
  Eigen::MatrixXd noise = 0.5 * sample_covariance(d.rowwise() - dmean);
  double scale = noise.trace() / static_cast<double>(c);
  if (!(scale > 0.0)) scale = cov.trace() / static_cast<double>(c);
  noise += Eigen::MatrixXd::Identity(c, c) * (ridge * scale);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(cov, noise);
  if (ges.info() != Eigen::Success) throw InvariantError("mnf_fit: generalized eigen-solve failed");
  m.components.resize(c, static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::Index src = c - 1 - static_cast<Eigen::Index>(j);
    m.components.col(static_cast<Eigen::Index>(j)) = ges.eigenvectors().col(src).normalized();
    m.explained.push_back(ges.eigenvalues()(src));
  }
  fix_signs(m.components);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> nes(noise);
  m.noise_whitening = nes.operatorInverseSqrt();
  return m;
}

ReductionModel ica_fit(const FeatureCube& cube, std::size_t k, const IcaOptions& options) {
  check_fit_inputs(cube, k, "ica_fit");
  Eigen::MatrixXd x = valid_pixel_matrix(cube);
  if (options.max_fit_samples > 0 && static_cast<std::size_t>(x.rows()) > options.max_fit_samples) {
    const auto n = static_cast<std::size_t>(x.rows());
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(options.max_fit_samples), x.cols());
    for (std::size_t i = 0; i < options.max_fit_samples; ++i)
      sub.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(i * n / options.max_fit_samples));
    x = std::move(sub);
  }
  ReductionModel m;
  m.kind = ReductionKind::kIca;
  m.input_channels = cube.names();
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  const Eigen::MatrixXd cov = sample_covariance(centered);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  require_rank(numeric_rank(es.eigenvalues()), k, "ica_fit");
  const Eigen::Index c = cov.rows();
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd whiten(kk, c);  // k x C
  for (Eigen::Index j = 0; j < kk; ++j)
    whiten.row(j) = es.eigenvectors().col(c - 1 - j).transpose() / std::sqrt(es.eigenvalues()(c - 1 - j));
  const Eigen::MatrixXd z = whiten * centered.transpose();  // k x n
  const double n = static_cast<double>(z.cols());

  auto sym_decorrelate = [](const Eigen::MatrixXd& w) -> Eigen::MatrixXd {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s(w * w.transpose());
    return s.operatorInverseSqrt() * w;
  };

  Rng rng(options.seed);
  Eigen::MatrixXd w(kk, kk);
  for (Eigen::Index i = 0; i < kk; ++i)
    for (Eigen::Index j = 0; j < kk; ++j) w(i, j) = rng.normal();
  w = sym_decorrelate(w);

  m.converged = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd wx = w * z;  // k x n
    const Eigen::MatrixXd g = wx.array().tanh().matrix();
    const Eigen::VectorXd g_prime_mean = (1.0 - g.array().square()).rowwise().mean();
    Eigen::MatrixXd w_new = (g * z.transpose()) / n - g_prime_mean.asDiagonal() * w;
    w_new = sym_decorrelate(w_new);
    const double lim = ((w_new * w.transpose()).diagonal().array().abs() - 1.0).abs().maxCoeff();
    w = std::move(w_new);
    if (lim < options.tolerance) {
      m.converged = true;
      ++it;
      break;
    }
  }
  m.iterations = it;
  m.components = (w * whiten).transpose();  // C x k
  fix_signs(m.components);
  return m;
}

std::vector<RealMap> scores(const ReductionModel& model, const FeatureCube& cube) {
  if (cube.channel_count() != model.input_dim())
    throw InvalidArgument("transform: cube has " + std::to_string(cube.channel_count()) + " channels, model expects " +
                          std::to_string(model.input_dim()));
  const std::size_t k = model.output_dim();
  const std::size_t c = model.input_dim();
  std::vector<RealMap> out(k, RealMap(cube.height(), cube.width(), 0.0));
  std::vector<double> px(c);
  for (std::size_t i = 0; i < cube.valid().size(); ++i) {
    if (!cube.valid()[i]) continue;
    for (std::size_t ch = 0; ch < c; ++ch) px[ch] = cube[ch][i] - model.mean(static_cast<Eigen::Index>(ch));
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch)
        s += px[ch] * model.components(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(j));
      out[j][i] = s;
    }
  }
  return out;
}

FeatureCube transform(const ReductionModel& model, const FeatureCube& cube) {
  auto raw = scores(model, cube);
  FeatureCube out(cube.height(), cube.width(), cube.valid());
  std::string prefix = to_string(model.kind);
  for (char& ch : prefix) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (std::size_t j = 0; j < raw.size(); ++j) {
    RealMap& m = raw[j];
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!cube.valid()[i]) continue;
      lo = std::min(lo, m[i]);
      hi = std::max(hi, m[i]);
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!cube.valid()[i]) continue;
      m[i] = hi > lo ? (m[i] - lo) / (hi - lo) : 0.0;
    }
    out.add(prefix + std::to_string(j + 1), std::move(m));
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw DataError("reduction model: matrix must be an array of rows");
  if (j.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(static_cast<std::size_t>(r)).size()) != cols)
      throw DataError("reduction model: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

}  // namespace

std::string model_to_json(const ReductionModel& model) {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = to_string(model.kind);
  j["input_channels"] = model.input_channels;
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["components"] = matrix_json(model.components);
  if (model.noise_whitening.size() > 0) j["noise_whitening"] = matrix_json(model.noise_whitening);
  j["diagnostics"] = {{"explained", model.explained}, {"converged", model.converged}, {"iterations", model.iterations}};
  return j.dump(2);
}

ReductionModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ReductionModel m;
    m.kind = parse_reduction_kind(j.at("kind").get<std::string>());
    m.input_channels = j.value("input_channels", std::vector<std::string>{});
    const auto mean = j.at("mean").get<std::vector<double>>();
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.components = matrix_from_json(j.at("components"));
    if (j.contains("noise_whitening")) m.noise_whitening = matrix_from_json(j.at("noise_whitening"));
    const auto& d = j.at("diagnostics");
    m.explained = d.value("explained", std::vector<double>{});
    m.converged = d.value("converged", true);
    m.iterations = d.value("iterations", 0);
    if (m.components.rows() != m.mean.size()) throw DataError("reduction model: mean/components size mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("reduction model JSON: ") + e.what());
  }
}

void save_model(const ReductionModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << model_to_json(model) << '\n';
}

ReductionModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace lidarsphere
