#include "metroflow/data/social.hpp"

#include <cmath>

namespace metroflow {
namespace {

template <typename Get>
double population_std(const std::vector<SocialFeatures>& stations, Get get) {
  if (stations.empty()) return 1.0;
  double mean = 0.0;
  for (const auto& s : stations) mean += get(s);
  mean /= static_cast<double>(stations.size());
  double var = 0.0;
  for (const auto& s : stations) var += (get(s) - mean) * (get(s) - mean);
  const double sd = std::sqrt(var / static_cast<double>(stations.size()));
  return sd > 0.0 ? sd : 1.0;
}

}  // namespace

SocialScaler SocialScaler::fit(const std::vector<SocialFeatures>& stations) {
  SocialScaler s;
  s.zone_scale = population_std(stations, [](const SocialFeatures& f) { return double(f.zone); });
  s.price_scale = population_std(stations, [](const SocialFeatures& f) { return f.housing_price; });
  s.life_scale = population_std(stations, [](const SocialFeatures& f) { return f.life_expectancy; });
  return s;
}

std::array<double, 3> SocialScaler::diff(const SocialFeatures& a, const SocialFeatures& b) const {
  return {std::fabs(double(a.zone - b.zone)) / zone_scale,
          std::fabs(a.housing_price - b.housing_price) / price_scale,
          std::fabs(a.life_expectancy - b.life_expectancy) / life_scale};
}

}  // namespace metroflow
