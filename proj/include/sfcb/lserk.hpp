#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sfcb {

/// Low-storage explicit Runge-Kutta scheme in Williamson form:
///   du = a_s du + dt f(u, t + c_s dt);  u += b_s du
struct LserkScheme {
  std::string name;
  int order = 0;
  std::vector<double> a, b, c;

  int n_stages() const { return static_cast<int>(a.size()); }

  /// Carpenter & Kennedy (1994), five stages, fourth order.
  static LserkScheme ck45();
  /// Williamson (1980), three stages, third order.
  static LserkScheme williamson3();
  /// "ck45" or "williamson3"; throws ConfigError otherwise.
  static LserkScheme by_name(std::string_view name);
};

}  // namespace sfcb
