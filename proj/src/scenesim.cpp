#include "astereo/scenesim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "astereo/io.hpp"

namespace astereo {

void SceneSample::validate() const {
  for (const Gridd* g : {&disp_R, &refl_L, &refl_R, &occ_L, &occ_R}) require_same_shape(disp_L, *g, "SceneSample");
  for (const Gridd* d : {&disp_L, &disp_R}) {
    if (!all_finite(*d)) throw NumericError("SceneSample: non-finite disparity");
    if (d->size() > 0 && (d->minCoeff() < 0 || d->maxCoeff() >= static_cast<double>(cols()))) {
      throw RangeError("SceneSample: disparity outside [0, W)");
    }
  }
}

void CaptureConfig::validate() const {
  if (!std::isfinite(gamma + alpha + beta + noise_sigma + clip_lo + clip_hi)) {
    throw ConfigError("capture: parameters must be finite");
  }
  if (!(gamma > 0)) throw ConfigError("capture: gamma must be positive");
  if (alpha < 0 || beta < 0 || noise_sigma < 0) throw ConfigError("capture: alpha, beta, noise_sigma must be >= 0");
  if (!(clip_lo < clip_hi)) throw ConfigError("capture: clip_lo must be below clip_hi");
}

double illuminator_shift(View view, const CameraRig& rig) {
  const double r = rig.baseline_narrow / rig.baseline_wide;
  return view == View::Left ? r : -(1.0 - r);
}

Gridd warp_pattern(const IlluminationPattern<double>& pattern, const Gridd& disp, const Gridd& occ, View view,
                   const CameraRig& rig) {
  if (!pattern.camera_resampled) throw ContractError("warp_pattern: pattern must be resampled to the camera grid");
  return warp_rows<double>(pattern.intensity, disp, occ, illuminator_shift(view, rig));
}

Gridd gaussian_noise(Eigen::Index rows, Eigen::Index cols, double sigma, std::uint64_t seed) {
  Gridd n = Gridd::Zero(rows, cols);
  if (sigma <= 0) return n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index i = 0; i < n.size(); ++i) n(i) = dist(rng);
  return n;
}

Gridd capture(const Gridd& p_view, const Gridd& refl, const CaptureConfig& cfg) {
  cfg.validate();
  return capture_with_noise<double>(p_view, refl, cfg,
                                    gaussian_noise(p_view.rows(), p_view.cols(), cfg.noise_sigma, cfg.rng_seed));
}

std::uint64_t view_seed(std::uint64_t seed, View view) {
  // splitmix64 finalizer keeps neighbouring seeds decorrelated
  std::uint64_t z = seed + (view == View::Left ? 0x9e3779b97f4a7c15ULL : 0x3c6ef372fe94f82aULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

StereoCapture synthesize_stereo(const IlluminationPattern<double>& pattern, const SceneSample& scene,
                                const CameraRig& rig, const CaptureConfig& cfg) {
  scene.validate();
  cfg.validate();
  const Gridd pl = warp_pattern(pattern, scene.disp_L, scene.occ_L, View::Left, rig);
  const Gridd pr = warp_pattern(pattern, scene.disp_R, scene.occ_R, View::Right, rig);
  CaptureConfig left = cfg, right = cfg;
  left.rng_seed = view_seed(cfg.rng_seed, View::Left);
  right.rng_seed = view_seed(cfg.rng_seed, View::Right);
  return StereoCapture{capture(pl, scene.refl_L, left), capture(pr, scene.refl_R, right), pattern.intensity};
}

// ---------------------------------------------------------------------------------------------

SceneDescriptor parse_scene_descriptor(std::istream& in) {
  SceneDescriptor desc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    auto fail = [&](const std::string& why) {
      throw FormatError("scene descriptor line " + std::to_string(lineno) + ": " + why);
    };
    if (first == "size") {
      long r = 0, c = 0;
      if (!(ss >> r >> c) || r < 2 || c < 2) fail("expected 'size <rows> <cols>'");
      desc.rows = r;
      desc.cols = c;
    } else if (first == "background") {
      if (!(ss >> desc.background_z >> desc.background_reflectance)) fail("expected 'background <z> <refl>'");
      if (!(desc.background_z > 0)) fail("background depth must be positive");
    } else {
      SceneRect r{};
      std::istringstream all(line);
      if (!(all >> r.x0 >> r.y0 >> r.x1 >> r.y1 >> r.z0 >> r.reflectance)) fail("expected 'x0 y0 x1 y1 z refl [z1]'");
      if (!(all >> r.z1)) r.z1 = r.z0;
      std::string extra;
      if (all >> extra) fail("trailing tokens");
      if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) fail("empty rectangle");
      if (!(r.z0 > 0) || !(r.z1 > 0)) fail("depth must be positive");
      if (r.reflectance < 0 || r.reflectance > 1) fail("reflectance must lie in [0, 1]");
      desc.rects.push_back(r);
    }
  }
  return desc;
}

SceneDescriptor read_scene_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene descriptor: " + path.string());
  return parse_scene_descriptor(in);
}

namespace {

struct Surface {
  double d0, slope, x0, x1, y0, y1, refl;
  bool background;

  double disparity_at(double xc) const { return d0 + slope * (xc - x0); }
  bool covers(double xc, double y) const {
    return background || (xc >= x0 && xc < x1 && y >= y0 && y < y1);
  }
  // Illuminator coordinate seen at view column xv when the view sits `k` disparities from the illuminator.
  double center_coord(double xv, double k) const {
    return (xv - k * (d0 - slope * x0)) / (1.0 + k * slope);
  }
};

struct Hit {
  int surface = -1;
  double xc = 0, d = 0;
};

Hit cast(const std::vector<Surface>& surfaces, double xv, double y, double k) {
  Hit best;
  best.d = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const auto& s = surfaces[i];
    const double xc = s.center_coord(xv, k);
    if (!s.covers(xc, y)) continue;
    const double d = s.disparity_at(xc);
    if (d > best.d) best = Hit{static_cast<int>(i), xc, d};
  }
  return best;
}

bool lit(const std::vector<Surface>& surfaces, const Hit& hit, double y) {
  for (const auto& s : surfaces) {
    if (s.background || !s.covers(hit.xc, y)) continue;
    if (s.disparity_at(hit.xc) > hit.d + 1e-9) return false;
  }
  return true;
}

}  // namespace

SceneSample generate_toy_scene(const SceneDescriptor& desc, const CameraRig& rig, std::vector<std::string>* warnings) {
  rig.validate();
  if (desc.rects.empty()) throw ConfigError("generate_toy_scene: scene has no rectangles");
  if (desc.rows < 2 || desc.cols < 2) throw ConfigError("generate_toy_scene: scene size not set");
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  auto check_depth = [&](double z, const char* what) {
    if (z < kMinDepth || z > kMaxDepth) {
      std::ostringstream ss;
      ss << what << " depth " << z << " m outside the valid range [" << kMinDepth << ", " << kMaxDepth << "] m";
      warn(ss.str());
    }
  };

  std::vector<Surface> surfaces;
  for (const auto& r : desc.rects) {
    check_depth(r.z0, "rectangle");
    if (r.z1 != r.z0) check_depth(r.z1, "rectangle");
    const double d0 = rig.disparity(r.z0), d1 = rig.disparity(r.z1);
    surfaces.push_back(Surface{d0, (d1 - d0) / (r.x1 - r.x0), r.x0, r.x1, r.y0, r.y1, r.reflectance, false});
  }
  check_depth(desc.background_z, "background");
  surfaces.push_back(Surface{rig.disparity(desc.background_z), 0, 0, 0, 0, 0, desc.background_reflectance, true});

  const Eigen::Index h = desc.rows, w = desc.cols;
  SceneSample s;
  s.disp_L = s.disp_R = s.refl_L = s.refl_R = s.occ_L = s.occ_R = Gridd::Zero(h, w);
  const double k_left = rig.baseline_narrow / rig.baseline_wide;
  const double k_right = -(1.0 - k_left);
  for (Eigen::Index y = 0; y < h; ++y) {
    const auto fy = static_cast<double>(y);
    for (Eigen::Index x = 0; x < w; ++x) {
      const auto fx = static_cast<double>(x);
      const Hit l = cast(surfaces, fx, fy, k_left);
      const Hit r = cast(surfaces, fx, fy, k_right);
      s.disp_L(y, x) = l.d;
      s.disp_R(y, x) = r.d;
      s.refl_L(y, x) = surfaces[static_cast<std::size_t>(l.surface)].refl;
      s.refl_R(y, x) = surfaces[static_cast<std::size_t>(r.surface)].refl;
      s.occ_L(y, x) = lit(surfaces, l, fy) ? 1.0 : 0.0;
      s.occ_R(y, x) = lit(surfaces, r, fy) ? 1.0 : 0.0;
    }
  }
  s.validate();
  return s;
}

Gridd lr_consistency_mask(const Gridd& disp_this, const Gridd& disp_other, double sign, double threshold) {
  require_same_shape(disp_this, disp_other, "lr_consistency_mask");
  const Eigen::Index h = disp_this.rows(), w = disp_this.cols();
  Gridd mask = Gridd::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const double d = disp_this(y, x);
      const double xo = static_cast<double>(x) + sign * d;
      if (xo < 0 || xo > static_cast<double>(w - 1)) continue;
      const auto i0 = static_cast<Eigen::Index>(std::floor(xo));
      const auto i1 = std::min(i0 + 1, w - 1);
      const double a = xo - static_cast<double>(i0);
      const double other = (1 - a) * disp_other(y, i0) + a * disp_other(y, i1);
      if (std::abs(d - other) <= threshold) mask(y, x) = 1.0;
    }
  }
  return mask;
}

Gridd shrink_occlusion_runs(const Gridd& stereo_visible, View view) {
  Gridd lit = Gridd::Ones(stereo_visible.rows(), stereo_visible.cols());
  const Eigen::Index w = stereo_visible.cols();
  for (Eigen::Index y = 0; y < stereo_visible.rows(); ++y) {
    Eigen::Index x = 0;
    while (x < w) {
      if (stereo_visible(y, x) != 0) {
        ++x;
        continue;
      }
      const Eigen::Index a = x;
      while (x < w && stereo_visible(y, x) == 0) ++x;
      const Eigen::Index b = x;
      const Eigen::Index keep = (b - a + 1) / 2;
      // left view: the occluder sits right of the run; right view: left of it
      const Eigen::Index from = view == View::Left ? b - keep : a;
      for (Eigen::Index i = from; i < from + keep; ++i) lit(y, i) = 0.0;
    }
  }
  return lit;
}

// ---------------------------------------------------------------------------------------------

Gridd nir_proxy(const std::vector<Gridd>& channels, double gain, double offset) {
  if (channels.empty()) throw FormatError("nir_proxy: image has no channels");
  Gridd luma;
  if (channels.size() >= 3) {
    luma = 0.299 * channels[0] + 0.587 * channels[1] + 0.114 * channels[2];
  } else {
    luma = channels[0];
  }
  return (gain * luma + offset).max(0.0).min(1.0);
}

SceneSample assemble_sample(Gridd disp_L, Gridd disp_R, Gridd refl_L, Gridd refl_R, const IngestOptions& options) {
  require_same_shape(disp_L, disp_R, "assemble_sample");
  require_same_shape(disp_L, refl_L, "assemble_sample");
  require_same_shape(disp_L, refl_R, "assemble_sample");
  const Eigen::Index rows = options.rows > 0 ? options.rows : disp_L.rows();
  const Eigen::Index cols = options.cols > 0 ? options.cols : disp_L.cols();
  if (rows != disp_L.rows() || cols != disp_L.cols()) {
    const double sx = static_cast<double>(cols) / static_cast<double>(disp_L.cols());
    disp_L = bilinear_resize(disp_L, rows, cols) * sx;
    disp_R = bilinear_resize(disp_R, rows, cols) * sx;
    refl_L = bilinear_resize(refl_L, rows, cols);
    refl_R = bilinear_resize(refl_R, rows, cols);
  }
  // non-finite source disparities (e.g. sky) are treated as zero
  for (Gridd* d : {&disp_L, &disp_R}) {
    *d = d->unaryExpr([cols](double v) { return std::isfinite(v) ? std::clamp(v, 0.0, static_cast<double>(cols - 1)) : 0.0; });
  }
  SceneSample s;
  s.occ_L = shrink_occlusion_runs(lr_consistency_mask(disp_L, disp_R, -1.0, options.lr_threshold), View::Left);
  s.occ_R = shrink_occlusion_runs(lr_consistency_mask(disp_R, disp_L, +1.0, options.lr_threshold), View::Right);
  s.disp_L = std::move(disp_L);
  s.disp_R = std::move(disp_R);
  s.refl_L = std::move(refl_L);
  s.refl_R = std::move(refl_R);
  s.validate();
  return s;
}

DatasetReader::DatasetReader(std::filesystem::path dir, IngestOptions options)
    : dir_(std::move(dir)), options_(options) {
  if (!std::filesystem::is_directory(dir_)) throw IoError("dataset directory not found: " + dir_.string());
  const std::string suffix = "_disp_L.pfm";
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) ids_.push_back(name.substr(0, name.size() - suffix.size()));
  }
  std::sort(ids_.begin(), ids_.end());
}

std::optional<SceneSample> DatasetReader::next() {
  while (cursor_ < ids_.size()) {
    const std::string id = ids_[cursor_++];
    auto image_path = [&](const char* view) -> std::optional<std::filesystem::path> {
      for (const char* ext : {".ppm", ".pgm"}) {
        auto p = dir_ / (id + "_" + view + ext);
        if (std::filesystem::exists(p)) return p;
      }
      return std::nullopt;
    };
    const auto disp_r_path = dir_ / (id + "_disp_R.pfm");
    const auto img_l = image_path("L");
    const auto img_r = image_path("R");
    if (!std::filesystem::exists(disp_r_path) || !img_l || !img_r) {
      diagnostics_.push_back("skipping '" + id + "': missing companion file");
      continue;
    }
    Gridd dl = io::read_pfm(dir_ / (id + "_disp_L.pfm"));
    Gridd dr = io::read_pfm(disp_r_path);
    Gridd rl, rr;
    try {
      rl = nir_proxy(io::read_netpbm(*img_l).channels, options_.nir_gain, options_.nir_offset);
      rr = nir_proxy(io::read_netpbm(*img_r).channels, options_.nir_gain, options_.nir_offset);
    } catch (const Error& e) {
      diagnostics_.push_back("skipping '" + id + "': " + e.what());
      continue;
    }
    try {
      SceneSample s = assemble_sample(std::move(dl), std::move(dr), std::move(rl), std::move(rr), options_);
      s.name = id;
      return s;
    } catch (const ShapeError& e) {
      diagnostics_.push_back("skipping '" + id + "': " + e.what());
    }
  }
  return std::nullopt;
}

}  // namespace astereo
