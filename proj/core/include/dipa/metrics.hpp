#pragma once

#include <string>
#include <vector>

#include "dipa/tensor.hpp"

namespace dipa {

// Reported when the reconstruction is exact.
inline constexpr double kPsnrCap = 99.0;

struct PsnrResult {
  double db = 0.0;
  bool capped = false;
};

// 10 log10(peak^2 / MSE), capped at kPsnrCap when MSE == 0.
PsnrResult psnr_checked(const Tensor& truth, const Tensor& estimate, double peak = 1.0);
double psnr(const Tensor& truth, const Tensor& estimate, double peak = 1.0);

struct MetricsRecord {
  std::string experiment;
  std::vector<double> per_image_psnr;
  double mean_psnr = 0.0;
  double std_psnr = 0.0;
  std::vector<double> fidelity_trace;
  double wall_seconds = 0.0;
};

// Population mean and standard deviation.
void summarize(MetricsRecord& record);

}  // namespace dipa
