#include "dipa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dipa {

PsnrResult psnr_checked(const Tensor& truth, const Tensor& estimate, double peak) {
  if (truth.shape() != estimate.shape()) {
    throw std::invalid_argument("psnr: shape mismatch " + shape_string(truth.shape()) + " vs " +
                                shape_string(estimate.shape()));
  }
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  if (truth.empty()) throw std::invalid_argument("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - estimate[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(truth.size());
  if (mse == 0.0) return {kPsnrCap, true};
  const double db = 10.0 * std::log10(peak * peak / mse);
  if (!std::isfinite(db)) return {kPsnrCap, true};
  return {std::min(db, kPsnrCap), db >= kPsnrCap};
}

double psnr(const Tensor& truth, const Tensor& estimate, double peak) {
  return psnr_checked(truth, estimate, peak).db;
}

void summarize(MetricsRecord& record) {
  const auto& v = record.per_image_psnr;
  if (v.empty()) {
    record.mean_psnr = record.std_psnr = 0.0;
    return;
  }
  double s = 0.0;
  for (double x : v) s += x;
  record.mean_psnr = s / static_cast<double>(v.size());
  double q = 0.0;
  for (double x : v) q += (x - record.mean_psnr) * (x - record.mean_psnr);
  record.std_psnr = std::sqrt(q / static_cast<double>(v.size()));
}

}  // namespace dipa
