#pragma once

// E-beam proximity-effect model: Gaussian-Pearson VII point spread functions,
// forward dose convolution on rasterized layouts, and iterative dose
// correction. Lengths are in nm; doses are relative to the clearing dose.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omkit/geometry.hpp"

namespace omkit::pec {

/// exp(-g^2/s^2) / (pi g^2 E_nu(g^2/s^2)) * exp(-r^2/s^2) * (r^2/g^2 + 1)^-nu.
/// Each term integrates to one over the plane; gamma = 0 or nu = 0 reduces
/// to the plain Gaussian exp(-r^2/s^2) / (pi s^2).
struct GpTerm {
  double weight = 1.0;
  double sigma = 1.0;   // nm
  double gamma = 0.0;   // nm
  double nu = 0.0;

  bool is_gaussian() const { return gamma == 0.0 || nu == 0.0; }
  std::vector<std::string> check() const;
};

struct PsfModel {
  std::vector<GpTerm> terms;
  double cutoff = 100.0;  // nm; the PSF is held flat at its cutoff value inside this radius

  /// Three-term model for a 250 nm GaAs slab on AlGaAs/GaAs.
  static PsfModel gaas_250nm();

  double weight_sum() const;
  std::vector<std::string> check() const;
  void validate() const;
};

/// Unweighted, normalized term density in nm^-2.
double gp_eval(const GpTerm& term, double r);

/// Weighted mixture evaluated at max(r, cutoff), in nm^-2.
double psf_eval(const PsfModel& model, double r);

PsfModel psf_from_json(const std::string& text);
std::string psf_to_json(const PsfModel& model);
PsfModel load_psf(const std::filesystem::path& path);

/// Row-major dose grid. Pixel (ix, iy) covers
/// [origin_x + ix*pixel, origin_x + (ix+1)*pixel) x [origin_y + iy*pixel, ...).
struct DoseMap {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  DoseMap() = default;
  DoseMap(std::size_t nx_, std::size_t ny_, double pixel_, double ox = 0.0, double oy = 0.0)
      : origin_x(ox), origin_y(oy), pixel(pixel_), nx(nx_), ny(ny_), values(nx_ * ny_, 0.0) {}

  double& at(std::size_t ix, std::size_t iy) { return values[iy * nx + ix]; }
  double at(std::size_t ix, std::size_t iy) const { return values[iy * nx + ix]; }
  double center_x(std::size_t ix) const { return origin_x + (ix + 0.5) * pixel; }
  double center_y(std::size_t iy) const { return origin_y + (iy + 0.5) * pixel; }
  bool same_grid(const DoseMap& other) const;
  double total() const;

  std::vector<std::string> check() const;
};

/// Antialiased coverage of the layout on a grid spanning its bounding box
/// plus `margin` nm on every side. Values are area fractions in [0, 1].
DoseMap rasterize(const geometry::Layout& layout, double pixel, double margin = 0.0);

/// Coverage accumulated into an existing grid (values are overwritten).
void rasterize_into(const geometry::Layout& layout, DoseMap& grid);

/// Binary exposure target from a coverage map: 1 where coverage >= threshold.
/// Partially covered edge pixels cannot be hit exactly once neighbours carry
/// back-scattered dose, so correction targets should be binary.
DoseMap exposure_target(const DoseMap& coverage, double threshold = 0.5);

class PaddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConvolveOptions {
  double extent_sigmas = 4.0;         // kernel truncation radius in units of sigma
  std::size_t max_fine_radius = 1024; // terms needing a wider kernel go to the coarse grid
  std::size_t coarse_factor = 8;      // minimum coarsening of the long-range grid
  std::size_t max_coarse_radius = 256;
  /// FFT zero padding in pixels; defaults to the fine kernel radius. An
  /// explicit value below the kernel radius raises PaddingError.
  std::optional<std::size_t> padding;
  /// When set, dose within one fine kernel radius of the map edge raises
  /// PaddingError instead of being silently scattered off-grid.
  bool require_margin = false;
};

/// Precomputed kernels and FFT plans for one grid shape. Not thread-safe;
/// use one instance per thread.
class DoseConvolver {
 public:
  DoseConvolver(std::size_t nx, std::size_t ny, double pixel, const PsfModel& model,
                const ConvolveOptions& options = {});
  ~DoseConvolver();
  DoseConvolver(DoseConvolver&&) noexcept;
  DoseConvolver& operator=(DoseConvolver&&) noexcept;

  /// Deposited dose on the same grid as `written`.
  DoseMap apply(const DoseMap& written) const;

  std::size_t fine_radius() const;
  std::size_t coarse_factor() const;  // 0 when every term is handled at full resolution
  double center_weight() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

DoseMap convolve_dose(const DoseMap& written, const PsfModel& model, const ConvolveOptions& options = {});

struct CorrectionOptions {
  int max_iterations = 200;
  double tolerance = 1e-3;
  double damping = 1.0;
  ConvolveOptions convolve;
};

struct CorrectionResult {
  DoseMap dose;          // written dose
  double residual = 0.0; // max |PSF * dose - target| over exposed pixels
  int iterations = 0;    // forward convolutions evaluated
  bool converged = false;
};

/// Damped projected fixed-point iteration d <- max(0, d + damping (T - PSF*d))
/// on pixels where the target is non-zero. On non-convergence the best iterate
/// is returned with converged = false.
CorrectionResult correct_dose(const DoseMap& target, const PsfModel& model, const CorrectionOptions& options = {});

/// Binary dose file: text header ("OMKIT-DOSE 1", dims, origin, pixel,
/// "end") followed by little-endian float64 values in row-major order.
void save_dose(const DoseMap& map, const std::filesystem::path& path);
DoseMap load_dose(const std::filesystem::path& path);

}  // namespace omkit::pec
