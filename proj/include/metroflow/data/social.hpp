#pragma once

#include <array>
#include <vector>

namespace metroflow {

struct SocialFeatures {
  int zone = 1;
  double housing_price = 0.0;
  double life_expectancy = 0.0;
};

/// Divides absolute social differences by the per-feature standard deviation
/// across stations. No centering, so identical stations map to (0,0,0).
struct SocialScaler {
  double zone_scale = 1.0;
  double price_scale = 1.0;
  double life_scale = 1.0;

  static SocialScaler fit(const std::vector<SocialFeatures>& stations);

  std::array<double, 3> diff(const SocialFeatures& a, const SocialFeatures& b) const;
};

}  // namespace metroflow
