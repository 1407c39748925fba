#include "features/feature_sets.hpp"

#include <algorithm>
#include <array>

#include "common/error.hpp"
#include "pointcloud/spatial_index.hpp"

namespace lidarsphere {
namespace {

struct TrioName {
  Trio trio;
  const char* token;
};

constexpr std::array<TrioName, 7> kTrios{{{Trio::kRaw, "RAW"},
                                          {Trio::kIrz, "IRZ"},
                                          {Trio::kN3, "N3"},
                                          {Trio::kCap, "CAP"},
                                          {Trio::kPca, "PCA"},
                                          {Trio::kMnf, "MNF"},
                                          {Trio::kIca, "ICA"}}};

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string canonical_token(std::string t) {
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (t == "I.R.Z" || t == "I.R.Z.") return "IRZ";
  if (t == "C.A.P" || t == "C.A.P.") return "CAP";
  return t;
}

}  // namespace

const char* to_string(Trio trio) {
  for (const auto& t : kTrios)
    if (t.trio == trio) return t.token;
  return "?";
}

std::vector<std::string> known_feature_sets() {
  return {"RAW", "IRZ",     "CAP",        "N3",          "PCA",   "MNF",    "ICA",
          "IRZ_CAP", "IRZ_N3", "IRZ_PCA", "IRZ_MNF", "IRZ_ICA", "N3_CAP", "IRZ_N3_CAP", "IRZ_N3_CAP_PCA"};
}

FeatureSetSpec parse_feature_set(const std::string& name) {
  auto fail = [&](const std::string& why) -> FeatureSetSpec {
    throw ConfigError("unknown feature set \"" + name + "\" (" + why + "); known sets: " +
                      join(known_feature_sets(), ", ") + "; any '_'-joined combination of distinct trios is accepted");
  };
  FeatureSetSpec spec;
  spec.name = name;
  std::size_t start = 0;
  while (start <= name.size()) {
    const std::size_t end = std::min(name.find('_', start), name.size());
    const std::string token = canonical_token(name.substr(start, end - start));
    auto it = std::find_if(kTrios.begin(), kTrios.end(), [&](const TrioName& t) { return token == t.token; });
    if (it == kTrios.end()) return fail("bad token \"" + token + "\"");
    if (std::find(spec.trios.begin(), spec.trios.end(), it->trio) != spec.trios.end())
      return fail("repeated token \"" + token + "\"");
    spec.trios.push_back(it->trio);
    start = end + 1;
  }
  return spec;
}

std::vector<std::uint32_t> nearest_occupants(const ProjectionIndex& index) {
  std::vector<std::uint32_t> ids;
  const std::size_t n = index.height() * index.width();
  for (std::size_t f = 0; f < n; ++f) {
    const auto pts = index.points_in(f);
    if (!pts.empty()) ids.push_back(pts.front());
  }
  return ids;
}

ScanRasters rasterize_scan(const PointCloud& cloud, const ProjectionIndex& index,
                           const std::vector<EigenFeatures>& descriptors) {
  if (index.point_count() != cloud.size()) throw InvalidArgument("rasterize_scan: projection does not match cloud");
  if (descriptors.size() != cloud.size()) throw InvalidArgument("rasterize_scan: descriptor count does not match cloud");
  const std::size_t h = index.height(), w = index.width();
  ScanRasters r;
  for (RealMap* m : {&r.intensity, &r.range, &r.z, &r.nx, &r.ny, &r.nz, &r.curvature, &r.anisotropy, &r.planarity})
    *m = RealMap(h, w);
  r.valid = BoolMask(h, w);
  for (std::size_t f = 0; f < h * w; ++f) {
    const auto pts = index.points_in(f);
    if (pts.empty()) continue;
    const std::uint32_t id = pts.front();
    const Point3& p = cloud.points[id];
    const EigenFeatures& e = descriptors[id];
    r.valid[f] = 1;
    r.intensity[f] = p.intensity;
    r.range[f] = index.range(id);
    r.z[f] = p.z;
    r.nx[f] = e.normal[0];
    r.ny[f] = e.normal[1];
    r.nz[f] = e.normal[2];
    r.curvature[f] = e.curvature;
    r.anisotropy[f] = e.anisotropy;
    r.planarity[f] = e.planarity;
  }
  return r;
}

ScanRasters compute_scan_rasters(const PointCloud& cloud, const ProjectionIndex& index,
                                 const DescriptorOptions& options) {
  const SpatialIndex tree(cloud);
  const auto ids = nearest_occupants(index);
  const auto desc = eigen_descriptors(cloud, tree, options, ids);
  return rasterize_scan(cloud, index, desc);
}

FeatureCube raw_cube(const ScanRasters& r) {
  FeatureCube cube(r.valid.height(), r.valid.width(), r.valid);
  cube.add("intensity_raw", r.intensity);
  cube.add("range_raw", r.range);
  cube.add("z_raw", r.z);
  return cube;
}

namespace {

FeatureCube cap_cube(const ScanRasters& r) {
  FeatureCube cube(r.valid.height(), r.valid.width(), r.valid);
  cube.add("curvature", r.curvature);
  cube.add("anisotropy", r.anisotropy);
  cube.add("planarity", r.planarity);
  return cube;
}

}  // namespace

FeatureCube build_feature_set(const ScanRasters& rasters, const FeatureSetSpec& spec,
                              const FeatureSetOptions& options, std::vector<ReductionModel>* models) {
  if (spec.trios.empty()) throw ConfigError("feature set \"" + spec.name + "\" has no channels");
  const auto& v = rasters.valid;
  FeatureCube irz, n3, cap, nine;
  auto need_irz = [&]() -> const FeatureCube& {
    if (irz.channel_count() == 0) irz = preprocess_basic(rasters.intensity, rasters.range, rasters.z, v, options.stretch);
    return irz;
  };
  auto need_n3 = [&]() -> const FeatureCube& {
    if (n3.channel_count() == 0) n3 = normals_to_pseudo_rgb(rasters.nx, rasters.ny, rasters.nz, v);
    return n3;
  };
  auto need_cap = [&]() -> const FeatureCube& {
    if (cap.channel_count() == 0) cap = cap_cube(rasters);
    return cap;
  };
  auto need_nine = [&]() -> const FeatureCube& {
    if (nine.channel_count() == 0) nine = stack({&need_irz(), &need_n3(), &need_cap()});
    return nine;
  };

  std::vector<FeatureCube> parts;
  parts.reserve(spec.trios.size());
  for (Trio t : spec.trios) {
    switch (t) {
      case Trio::kRaw: parts.push_back(raw_cube(rasters)); break;
      case Trio::kIrz: parts.push_back(need_irz()); break;
      case Trio::kN3: parts.push_back(need_n3()); break;
      case Trio::kCap: parts.push_back(need_cap()); break;
      case Trio::kPca:
      case Trio::kMnf:
      case Trio::kIca: {
        ReductionModel m = t == Trio::kPca   ? pca_fit(need_nine(), 3)
                           : t == Trio::kMnf ? mnf_fit(need_nine(), 3, options.mnf_ridge)
                                             : ica_fit(need_nine(), 3, options.ica);
        parts.push_back(transform(m, need_nine()));
        if (models) models->push_back(std::move(m));
        break;
      }
    }
  }
  std::vector<const FeatureCube*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  return stack(ptrs);
}

}  // namespace lidarsphere
