#include "omkit/pec.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <numbers>
#include <limits>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "omkit/errors.hpp"
#include "omkit/special.hpp"

namespace omkit::pec {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t k = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (k % p == 0) k /= p;
    if (k == 1) return m;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Point spread function

std::vector<std::string> GpTerm::check() const {
  std::vector<std::string> problems;
  if (!(weight > 0)) problems.push_back("term weight must be > 0");
  if (!(sigma > 0)) problems.push_back("term sigma must be > 0");
  if (!(gamma >= 0)) problems.push_back("term gamma must be >= 0");
  if (!(nu >= 0)) problems.push_back("term nu must be >= 0");
  return problems;
}

PsfModel PsfModel::gaas_250nm() {
  PsfModel m;
  m.terms = {
      {0.143885, 685.0, 1.0, 1.0},
      {0.172662, 5.0, 0.0, 0.0},
      {0.683453, 13000.0, 0.0, 0.0},
  };
  m.cutoff = 100.0;
  return m;
}

double PsfModel::weight_sum() const {
  double sum = 0.0;
  for (const auto& t : terms) sum += t.weight;
  return sum;
}

std::vector<std::string> PsfModel::check() const {
  std::vector<std::string> problems;
  if (terms.empty()) problems.push_back("PSF needs at least one term");
  for (std::size_t i = 0; i < terms.size(); ++i)
    for (auto& p : terms[i].check()) problems.push_back("terms[" + std::to_string(i) + "]: " + p);
  if (!terms.empty() && std::abs(weight_sum() - 1.0) > 1e-9)
    problems.push_back("PSF weights must sum to 1 (got " + std::to_string(weight_sum()) + ")");
  if (!(cutoff >= 0)) problems.push_back("cutoff must be >= 0");
  return problems;
}

void PsfModel::validate() const { throw_if_any(check()); }

double gp_eval(const GpTerm& term, double r) {
  throw_if_any(term.check());
  if (!(r >= 0)) throw std::domain_error("gp_eval: r must be >= 0");
  const double s2 = term.sigma * term.sigma;
  const double gauss = std::exp(-r * r / s2);
  if (term.is_gaussian()) return gauss / (kPi * s2);
  const double g2 = term.gamma * term.gamma;
  // exp(-x) / E_nu(x) == 1 / (exp(x) E_nu(x)), stable for large x.
  const double prefactor = 1.0 / (kPi * g2 * special::expint_scaled(term.nu, g2 / s2));
  return prefactor * gauss * std::pow(r * r / g2 + 1.0, -term.nu);
}

double psf_eval(const PsfModel& model, double r) {
  if (!(r >= 0)) throw std::domain_error("psf_eval: r must be >= 0");
  const double rr = std::max(r, model.cutoff);
  double sum = 0.0;
  for (const auto& t : model.terms) sum += t.weight * gp_eval(t, rr);
  return sum;
}

PsfModel psf_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  PsfModel m;
  m.cutoff = doc.value("cutoff_nm", 0.0);
  for (const auto& t : doc.at("terms"))
    m.terms.push_back({t.at("weight").get<double>(), t.at("sigma_nm").get<double>(),
                       t.value("gamma_nm", 0.0), t.value("nu", 0.0)});
  m.validate();
  return m;
}

std::string psf_to_json(const PsfModel& model) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : model.terms)
    terms.push_back({{"weight", t.weight}, {"sigma_nm", t.sigma}, {"gamma_nm", t.gamma}, {"nu", t.nu}});
  return nlohmann::json{{"terms", terms}, {"cutoff_nm", model.cutoff}}.dump(2);
}

PsfModel load_psf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open PSF file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return psf_from_json(buf.str());
}

// ---------------------------------------------------------------------------
// Dose grid

bool DoseMap::same_grid(const DoseMap& o) const {
  return nx == o.nx && ny == o.ny && pixel == o.pixel && origin_x == o.origin_x && origin_y == o.origin_y;
}

double DoseMap::total() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

std::vector<std::string> DoseMap::check() const {
  std::vector<std::string> problems;
  if (nx == 0 || ny == 0) problems.push_back("dose grid dimensions must be > 0");
  if (!(pixel > 0)) problems.push_back("dose grid pixel must be > 0");
  if (values.size() != nx * ny) problems.push_back("dose grid value count does not match dimensions");
  for (double v : values) {
    if (!(v >= 0)) {
      problems.push_back("dose values must be non-negative");
      break;
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Rasterization by signed-area accumulation: each edge deposits its exact
// area contribution into a per-row accumulator; a prefix sum along the row
// yields the covered fraction of every pixel.

namespace {

class CoverageAccumulator {
 public:
  CoverageAccumulator(std::size_t w, std::size_t h) : w_(w), h_(h), acc_((w + 2) * h, 0.0) {}

  void add_edge(double x0, double y0, double x1, double y1) {
    // Split at the vertical grid boundaries, then clamp x into [0, w];
    // material left of the grid still contributes its winding to every pixel.
    const double w = static_cast<double>(w_);
    std::vector<std::pair<double, double>> pts{{x0, y0}};
    std::vector<double> ts;
    for (double bound : {0.0, w}) {
      if ((x0 - bound) * (x1 - bound) < 0.0) ts.push_back((bound - x0) / (x1 - x0));
    }
    std::sort(ts.begin(), ts.end());
    for (double t : ts) pts.push_back({x0 + t * (x1 - x0), y0 + t * (y1 - y0)});
    pts.push_back({x1, y1});
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      line(std::clamp(pts[i].first, 0.0, w), pts[i].second, std::clamp(pts[i + 1].first, 0.0, w),
           pts[i + 1].second);
    }
  }

  double coverage(std::size_t ix, std::size_t iy) const { return cov_[iy * w_ + ix]; }

  void finish() {
    cov_.assign(w_ * h_, 0.0);
    for (std::size_t y = 0; y < h_; ++y) {
      double run = 0.0;
      const double* row = &acc_[y * (w_ + 2)];
      for (std::size_t x = 0; x < w_; ++x) {
        run += row[x];
        cov_[y * w_ + x] = std::min(1.0, std::abs(run));
      }
    }
  }

 private:
  void line(double x0, double y0, double x1, double y1) {
    if (std::abs(y0 - y1) <= 1e-15) return;
    double dir = 1.0;
    if (y0 > y1) {
      std::swap(x0, x1);
      std::swap(y0, y1);
      dir = -1.0;
    }
    const double dxdy = (x1 - x0) / (y1 - y0);
    double x = x0;
    if (y0 < 0.0) x -= y0 * dxdy;
    const long ystart = std::max(0L, static_cast<long>(std::floor(y0)));
    const long yend = std::min(static_cast<long>(h_), static_cast<long>(std::ceil(y1)));
    for (long y = ystart; y < yend; ++y) {
      double* row = &acc_[static_cast<std::size_t>(y) * (w_ + 2)];
      const double dy = std::min(static_cast<double>(y + 1), y1) - std::max(static_cast<double>(y), y0);
      const double xnext = x + dxdy * dy;
      const double d = dy * dir;
      const double xa = std::min(x, xnext);
      const double xb = std::max(x, xnext);
      const double xa_floor = std::floor(xa);
      const long xai = static_cast<long>(xa_floor);
      const double xb_ceil = std::ceil(xb);
      const long xbi = static_cast<long>(xb_ceil);
      if (xbi <= xai + 1) {
        const double xmf = 0.5 * (x + xnext) - xa_floor;
        row[xai] += d - d * xmf;
        row[xai + 1] += d * xmf;
      } else {
        const double s = 1.0 / (xb - xa);
        const double xaf = xa - xa_floor;
        const double a0 = 0.5 * s * (1.0 - xaf) * (1.0 - xaf);
        const double xbf = xb - xb_ceil + 1.0;
        const double am = 0.5 * s * xbf * xbf;
        row[xai] += d * a0;
        if (xbi == xai + 2) {
          row[xai + 1] += d * (1.0 - a0 - am);
        } else {
          const double a1 = s * (1.5 - xaf);
          row[xai + 1] += d * (a1 - a0);
          for (long xi = xai + 2; xi < xbi - 1; ++xi) row[xi] += d * s;
          const double a2 = a1 + static_cast<double>(xbi - xai - 3) * s;
          row[xbi - 1] += d * (1.0 - a2 - am);
        }
        row[xbi] += d * am;
      }
      x = xnext;
    }
  }

  std::size_t w_, h_;
  std::vector<double> acc_;
  std::vector<double> cov_;
};

}  // namespace

void rasterize_into(const geometry::Layout& layout, DoseMap& grid) {
  if (layout.polygons.empty()) throw std::invalid_argument("rasterize: empty layout");
  if (grid.nx == 0 || grid.ny == 0 || !(grid.pixel > 0)) throw std::invalid_argument("rasterize: invalid grid");
  CoverageAccumulator acc(grid.nx, grid.ny);
  const double inv = 1.0 / grid.pixel;
  for (const auto& poly : layout.polygons) {
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& a = v[i];
      const auto& b = v[(i + 1) % v.size()];
      acc.add_edge((a.x - grid.origin_x) * inv, (a.y - grid.origin_y) * inv, (b.x - grid.origin_x) * inv,
                   (b.y - grid.origin_y) * inv);
    }
  }
  acc.finish();
  grid.values.assign(grid.nx * grid.ny, 0.0);
  for (std::size_t iy = 0; iy < grid.ny; ++iy)
    for (std::size_t ix = 0; ix < grid.nx; ++ix) grid.at(ix, iy) = acc.coverage(ix, iy);
}

DoseMap exposure_target(const DoseMap& coverage, double threshold) {
  if (!(threshold > 0 && threshold <= 1)) throw std::invalid_argument("exposure_target: threshold must lie in (0, 1]");
  DoseMap out = coverage;
  for (double& v : out.values) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

DoseMap rasterize(const geometry::Layout& layout, double pixel, double margin) {
  if (layout.polygons.empty()) throw std::invalid_argument("rasterize: empty layout");
  if (!(pixel > 0)) throw std::invalid_argument("rasterize: pixel must be > 0");
  if (!(margin >= 0)) throw std::invalid_argument("rasterize: margin must be >= 0");
  const auto box = layout.bounds();
  const auto nx = static_cast<std::size_t>(std::ceil((box.width() + 2 * margin) / pixel));
  const auto ny = static_cast<std::size_t>(std::ceil((box.height() + 2 * margin) / pixel));
  DoseMap grid(std::max<std::size_t>(nx, 1), std::max<std::size_t>(ny, 1), pixel, box.min.x - margin,
               box.min.y - margin);
  rasterize_into(layout, grid);
  return grid;
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double, FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex, FftwDeleter>;

class Plan {
 public:
  Plan() = default;
  explicit Plan(fftw_plan p) : plan_(p) {}
  Plan(Plan&& o) noexcept : plan_(std::exchange(o.plan_, nullptr)) {}
  Plan& operator=(Plan&& o) noexcept {
    if (this != &o) {
      reset();
      plan_ = std::exchange(o.plan_, nullptr);
    }
    return *this;
  }
  ~Plan() { reset(); }
  void execute() const { fftw_execute(plan_); }

 private:
  void reset() {
    if (plan_) {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
      plan_ = nullptr;
    }
  }
  fftw_plan plan_ = nullptr;
};

// Linear convolution of an nx x ny image with a (2R+1)^2 kernel through a
// zero-padded FFT of size >= n + R in each direction (no wrap-around into
// the output window).
class FftConvolution {
 public:
  FftConvolution(std::size_t nx, std::size_t ny, std::size_t padding, const std::vector<double>& kernel,
                 std::size_t radius)
      : nx_(nx), ny_(ny), fx_(fft_size(nx + padding)), fy_(fft_size(ny + padding)), cx_(fx_ / 2 + 1) {
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * fx_ * fy_)));
    spec_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * cx_ * fy_)));
    kernel_spec_.assign(cx_ * fy_, {0.0, 0.0});
    {
      std::lock_guard lock(planner_mutex());
      forward_ = Plan(fftw_plan_dft_r2c_2d(static_cast<int>(fy_), static_cast<int>(fx_), real_.get(), spec_.get(),
                                           FFTW_ESTIMATE));
      backward_ = Plan(fftw_plan_dft_c2r_2d(static_cast<int>(fy_), static_cast<int>(fx_), spec_.get(), real_.get(),
                                            FFTW_ESTIMATE));
    }
    // Kernel spectrum, kernel centered at index (0, 0) with wrap-around.
    std::fill(real_.get(), real_.get() + fx_ * fy_, 0.0);
    const long r = static_cast<long>(radius);
    const std::size_t side = 2 * radius + 1;
    for (long dy = -r; dy <= r; ++dy) {
      for (long dx = -r; dx <= r; ++dx) {
        const double k = kernel[static_cast<std::size_t>(dy + r) * side + static_cast<std::size_t>(dx + r)];
        if (k == 0.0) continue;
        const std::size_t ix = static_cast<std::size_t>((dx + static_cast<long>(fx_)) % static_cast<long>(fx_));
        const std::size_t iy = static_cast<std::size_t>((dy + static_cast<long>(fy_)) % static_cast<long>(fy_));
        real_.get()[iy * fx_ + ix] += k;
      }
    }
    forward_.execute();
    const double scale = 1.0 / static_cast<double>(fx_ * fy_);
    for (std::size_t i = 0; i < cx_ * fy_; ++i)
      kernel_spec_[i] = std::complex<double>(spec_.get()[i][0], spec_.get()[i][1]) * scale;
  }

  // out[i] (+)= (in * kernel)[i] over the nx x ny window.
  void apply(const double* in, double* out, bool accumulate) const {
    double* buf = real_.get();
    std::fill(buf, buf + fx_ * fy_, 0.0);
    for (std::size_t y = 0; y < ny_; ++y) std::copy(in + y * nx_, in + (y + 1) * nx_, buf + y * fx_);
    forward_.execute();
    fftw_complex* s = spec_.get();
    for (std::size_t i = 0; i < cx_ * fy_; ++i) {
      const std::complex<double> v = std::complex<double>(s[i][0], s[i][1]) * kernel_spec_[i];
      s[i][0] = v.real();
      s[i][1] = v.imag();
    }
    backward_.execute();
    for (std::size_t y = 0; y < ny_; ++y) {
      for (std::size_t x = 0; x < nx_; ++x) {
        const double v = buf[y * fx_ + x];
        if (accumulate)
          out[y * nx_ + x] += v;
        else
          out[y * nx_ + x] = v;
      }
    }
  }

 private:
  std::size_t nx_, ny_, fx_, fy_, cx_;
  RealBuffer real_;
  ComplexBuffer spec_;
  std::vector<std::complex<double>> kernel_spec_;
  Plan forward_, backward_;
};

}  // namespace

struct DoseConvolver::Impl {
  std::size_t nx = 0, ny = 0;
  double pixel = 1.0;
  ConvolveOptions options;
  std::size_t fine_radius = 0;
  double center = 0.0;
  std::unique_ptr<FftConvolution> fine;

  std::size_t factor = 0;  // coarse grid factor, 0 when unused
  std::size_t cnx = 0, cny = 0;
  std::unique_ptr<FftConvolution> coarse;
  mutable std::vector<double> coarse_in, coarse_out;
};

DoseConvolver::DoseConvolver(std::size_t nx, std::size_t ny, double pixel, const PsfModel& model,
                             const ConvolveOptions& options)
    : impl_(std::make_unique<Impl>()) {
  model.validate();
  if (nx == 0 || ny == 0 || !(pixel > 0)) throw std::invalid_argument("DoseConvolver: invalid grid");
  auto& im = *impl_;
  im.nx = nx;
  im.ny = ny;
  im.pixel = pixel;
  im.options = options;

  std::vector<GpTerm> fine_terms, long_terms;
  double fine_extent = pixel;  // nm
  double long_extent = 0.0;
  for (const auto& t : model.terms) {
    const double extent = std::max(options.extent_sigmas * t.sigma, model.cutoff);
    if (extent / pixel > static_cast<double>(options.max_fine_radius)) {
      long_terms.push_back(t);
      long_extent = std::max(long_extent, options.extent_sigmas * t.sigma);
    } else {
      fine_terms.push_back(t);
      fine_extent = std::max(fine_extent, extent);
    }
  }
  auto eval = [&](const std::vector<GpTerm>& terms, double r) {
    double v = 0.0;
    const double rr = std::max(r, model.cutoff);
    for (const auto& t : terms) {
      const double extent = std::max(options.extent_sigmas * t.sigma, model.cutoff);
      if (r <= extent) v += t.weight * gp_eval(t, rr);
    }
    return v;
  };

  double off_center_mass = 0.0;

  // Long-range terms on a coarsened grid.
  std::vector<double> coarse_kernel;
  std::size_t coarse_radius = 0;
  if (!long_terms.empty()) {
    std::size_t f = std::max<std::size_t>(options.coarse_factor, 1);
    while (std::ceil(long_extent / (static_cast<double>(f) * pixel)) > static_cast<double>(options.max_coarse_radius))
      f *= 2;
    im.factor = f;
    const double cp = static_cast<double>(f) * pixel;
    coarse_radius = static_cast<std::size_t>(std::ceil(long_extent / cp));
    const std::size_t side = 2 * coarse_radius + 1;
    coarse_kernel.assign(side * side, 0.0);
    const long r = static_cast<long>(coarse_radius);
    for (long dy = -r; dy <= r; ++dy)
      for (long dx = -r; dx <= r; ++dx) {
        const double k = eval(long_terms, cp * std::hypot(double(dx), double(dy))) * cp * cp;
        coarse_kernel[static_cast<std::size_t>(dy + r) * side + static_cast<std::size_t>(dx + r)] = k;
        off_center_mass += k;
      }
    im.cnx = (nx + f - 1) / f;
    im.cny = (ny + f - 1) / f;
    im.coarse = std::make_unique<FftConvolution>(im.cnx, im.cny, coarse_radius, coarse_kernel, coarse_radius);
    im.coarse_in.assign(im.cnx * im.cny, 0.0);
    im.coarse_out.assign(im.cnx * im.cny, 0.0);
  }

  // Short-range terms at full resolution. The centre pixel absorbs whatever
  // mass the sampled kernel misses (sub-pixel cores, flat-core deficit,
  // truncation) so that the total kernel weight is exactly one.
  im.fine_radius = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fine_extent / pixel)));
  const std::size_t side = 2 * im.fine_radius + 1;
  std::vector<double> fine_kernel(side * side, 0.0);
  const long r = static_cast<long>(im.fine_radius);
  for (long dy = -r; dy <= r; ++dy)
    for (long dx = -r; dx <= r; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const double k = eval(fine_terms, pixel * std::hypot(double(dx), double(dy))) * pixel * pixel;
      fine_kernel[static_cast<std::size_t>(dy + r) * side + static_cast<std::size_t>(dx + r)] = k;
      off_center_mass += k;
    }
  im.center = 1.0 - off_center_mass;
  if (im.center < -1e-9)
    throw std::invalid_argument("DoseConvolver: sampled PSF mass exceeds one; grid too coarse for the PSF");
  im.center = std::max(im.center, 0.0);
  fine_kernel[static_cast<std::size_t>(r) * side + static_cast<std::size_t>(r)] = im.center;

  std::size_t padding = im.fine_radius;
  if (options.padding) {
    if (*options.padding < im.fine_radius)
      throw PaddingError("convolve_dose: padding of " + std::to_string(*options.padding) +
                         " px is below the kernel radius of " + std::to_string(im.fine_radius) + " px");
    padding = *options.padding;
  }
  im.fine = std::make_unique<FftConvolution>(nx, ny, padding, fine_kernel, im.fine_radius);
}

DoseConvolver::~DoseConvolver() = default;
DoseConvolver::DoseConvolver(DoseConvolver&&) noexcept = default;
DoseConvolver& DoseConvolver::operator=(DoseConvolver&&) noexcept = default;

std::size_t DoseConvolver::fine_radius() const { return impl_->fine_radius; }
std::size_t DoseConvolver::coarse_factor() const { return impl_->factor; }
double DoseConvolver::center_weight() const { return impl_->center; }

DoseMap DoseConvolver::apply(const DoseMap& written) const {
  const auto& im = *impl_;
  if (written.nx != im.nx || written.ny != im.ny || written.pixel != im.pixel)
    throw std::invalid_argument("DoseConvolver: grid mismatch");
  if (written.values.size() != written.nx * written.ny)
    throw std::invalid_argument("DoseConvolver: value count does not match dimensions");

  if (im.options.require_margin) {
    const std::size_t m = im.fine_radius;
    for (std::size_t y = 0; y < im.ny; ++y)
      for (std::size_t x = 0; x < im.nx; ++x) {
        const bool edge = x < m || y < m || x + m >= im.nx || y + m >= im.ny;
        if (edge && written.at(x, y) != 0.0)
          throw PaddingError("convolve_dose: dose within " + std::to_string(m) +
                             " px of the map edge; enlarge the zero margin");
      }
  }

  DoseMap out = written;
  im.fine->apply(written.values.data(), out.values.data(), false);

  if (im.coarse) {
    const std::size_t f = im.factor;
    const double inv_area = 1.0 / static_cast<double>(f * f);
    std::fill(im.coarse_in.begin(), im.coarse_in.end(), 0.0);
    for (std::size_t y = 0; y < im.ny; ++y)
      for (std::size_t x = 0; x < im.nx; ++x) im.coarse_in[(y / f) * im.cnx + x / f] += written.at(x, y) * inv_area;
    im.coarse->apply(im.coarse_in.data(), im.coarse_out.data(), false);

    // Bilinear interpolation of coarse pixel centers onto fine pixel centers.
    auto sample = [&](long cx, long cy) {
      cx = std::clamp(cx, 0L, static_cast<long>(im.cnx) - 1);
      cy = std::clamp(cy, 0L, static_cast<long>(im.cny) - 1);
      return im.coarse_out[static_cast<std::size_t>(cy) * im.cnx + static_cast<std::size_t>(cx)];
    };
    for (std::size_t y = 0; y < im.ny; ++y) {
      const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(f) - 0.5;
      const long y0 = static_cast<long>(std::floor(v));
      const double ty = v - static_cast<double>(y0);
      for (std::size_t x = 0; x < im.nx; ++x) {
        const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(f) - 0.5;
        const long x0 = static_cast<long>(std::floor(u));
        const double tx = u - static_cast<double>(x0);
        const double val = (1 - tx) * (1 - ty) * sample(x0, y0) + tx * (1 - ty) * sample(x0 + 1, y0) +
                           (1 - tx) * ty * sample(x0, y0 + 1) + tx * ty * sample(x0 + 1, y0 + 1);
        out.at(x, y) += val;
      }
    }
  }
  return out;
}

DoseMap convolve_dose(const DoseMap& written, const PsfModel& model, const ConvolveOptions& options) {
  DoseConvolver conv(written.nx, written.ny, written.pixel, model, options);
  return conv.apply(written);
}

CorrectionResult correct_dose(const DoseMap& target, const PsfModel& model, const CorrectionOptions& options) {
  throw_if_any(target.check());
  for (double v : target.values)
    if (v > 1.0 + 1e-12) throw std::invalid_argument("correct_dose: target values must lie in [0, 1]");
  if (options.max_iterations < 1) throw std::invalid_argument("correct_dose: max_iterations must be >= 1");
  if (!(options.damping > 0)) throw std::invalid_argument("correct_dose: damping must be > 0");

  DoseConvolver conv(target.nx, target.ny, target.pixel, model, options.convolve);
  const std::size_t n = target.values.size();

  DoseMap dose = target;
  CorrectionResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iterations; ++it) {
    const DoseMap deposited = conv.apply(dose);
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (target.values[i] > 0.0) residual = std::max(residual, std::abs(deposited.values[i] - target.values[i]));
    best.iterations = it;
    if (residual < best.residual) {
      best.residual = residual;
      best.dose = dose;
    }
    if (residual <= options.tolerance) {
      best.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (target.values[i] > 0.0)
        dose.values[i] = std::max(0.0, dose.values[i] + options.damping * (target.values[i] - deposited.values[i]));
    }
  }
  return best;
}

}  // namespace omkit::pec
