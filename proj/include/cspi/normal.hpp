#pragma once

namespace cspi {

// Standard normal CDF.
double std_normal_cdf(double x);

// Standard normal quantile (inverse CDF). Throws std::invalid_argument
// unless p lies strictly in (0, 1). Accurate to roughly 1e-15 relative
// error over the usable double range.
double std_normal_quantile(double p);

}  // namespace cspi
