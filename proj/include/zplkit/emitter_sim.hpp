#pragma once

// Kinetic Monte Carlo model of a single three-level emitter (ground,
// excited, shelving) producing detector click streams, plus the start-stop
// style coincidence histogram used to close the loop on the g2 analysis.
// All randomness flows from one seeded mt19937_64 so runs are reproducible
// bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "zplkit/photostats.hpp"

namespace zplkit {

struct EmitterRates {
  double k_exc_per_ns = 0.0;   // ground -> excited pump rate
  double k_rad_per_ns = 0.0;   // excited -> ground radiative decay
  double k_sh_per_ns = 0.0;    // excited -> shelving
  double k_des_per_ns = 0.0;   // shelving -> ground
  double detection_efficiency = 1.0;
  double background_per_ns = 0.0;  // uncorrelated Poisson click rate
  double jitter_sigma_ns = 0.0;    // Gaussian timing jitter on emitter clicks
};

inline void validate_rates(const EmitterRates& r) {
  auto finite_nonneg = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
  };
  finite_nonneg(r.k_exc_per_ns, "k_exc_per_ns");
  finite_nonneg(r.k_sh_per_ns, "k_sh_per_ns");
  finite_nonneg(r.k_des_per_ns, "k_des_per_ns");
  finite_nonneg(r.background_per_ns, "background_per_ns");
  finite_nonneg(r.jitter_sigma_ns, "jitter_sigma_ns");
  if (!std::isfinite(r.k_rad_per_ns) || r.k_rad_per_ns <= 0.0)
    throw std::invalid_argument("k_rad_per_ns must be finite and > 0");
  if (!(r.detection_efficiency > 0.0 && r.detection_efficiency <= 1.0))
    throw std::invalid_argument("detection_efficiency must be in (0, 1]");
}

struct ClickStream {
  std::vector<double> timestamps_ns;  // sorted
  double duration_ns = 0.0;
  std::uint64_t seed = 0;
};

namespace detail_sim {

inline double uniform01(std::mt19937_64& g) {
  // 53-bit mantissa draw in [0, 1)
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double exponential(std::mt19937_64& g, double rate_per_ns) {
  return -std::log1p(-uniform01(g)) / rate_per_ns;
}

inline double gaussian(std::mt19937_64& g, double sigma) {
  // Box-Muller; one draw per call keeps the stream layout simple
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  constexpr double two_pi = 6.283185307179586;
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace detail_sim

// Gillespie walk over ground/excited/shelving. Each radiative decay yields a
// detector click with probability detection_efficiency; uncorrelated
// background clicks are merged in afterwards.
inline ClickStream simulate_click_stream(const EmitterRates& rates, double duration_ns,
                                         std::uint64_t seed) {
  validate_rates(rates);
  if (!(duration_ns > 0.0) || !std::isfinite(duration_ns))
    throw std::invalid_argument("duration_ns must be finite and > 0");
  if (!(rates.k_exc_per_ns > 0.0))
    throw std::invalid_argument("k_exc_per_ns must be > 0 to produce clicks");

  std::mt19937_64 gen(seed);
  ClickStream out;
  out.duration_ns = duration_ns;
  out.seed = seed;

  enum class State { ground, excited, shelved };
  State s = State::ground;
  double t = 0.0;
  while (true) {
    if (s == State::ground) {
      t += detail_sim::exponential(gen, rates.k_exc_per_ns);
      if (t >= duration_ns) break;
      s = State::excited;
    } else if (s == State::excited) {
      const double total = rates.k_rad_per_ns + rates.k_sh_per_ns;
      t += detail_sim::exponential(gen, total);
      if (t >= duration_ns) break;
      const bool radiative = detail_sim::uniform01(gen) * total < rates.k_rad_per_ns;
      if (radiative) {
        if (detail_sim::uniform01(gen) < rates.detection_efficiency) {
          double stamp = t;
          if (rates.jitter_sigma_ns > 0.0)
            stamp += detail_sim::gaussian(gen, rates.jitter_sigma_ns);
          if (stamp >= 0.0 && stamp < duration_ns) out.timestamps_ns.push_back(stamp);
        }
        s = State::ground;
      } else {
        s = State::shelved;
      }
    } else {
      if (rates.k_des_per_ns <= 0.0) break;  // trapped for good
      t += detail_sim::exponential(gen, rates.k_des_per_ns);
      if (t >= duration_ns) break;
      s = State::ground;
    }
  }

  if (rates.background_per_ns > 0.0) {
    double tb = 0.0;
    while (true) {
      tb += detail_sim::exponential(gen, rates.background_per_ns);
      if (tb >= duration_ns) break;
      out.timestamps_ns.push_back(tb);
    }
  }
  std::sort(out.timestamps_ns.begin(), out.timestamps_ns.end());
  return out;
}

// Combines streams from independent emitters measured together.
inline ClickStream merge_streams(const std::vector<ClickStream>& streams) {
  if (streams.empty()) throw std::invalid_argument("merge_streams needs >= 1 stream");
  ClickStream out;
  out.duration_ns = streams.front().duration_ns;
  out.seed = streams.front().seed;
  for (const auto& s : streams) {
    if (s.duration_ns != out.duration_ns)
      throw std::invalid_argument("merge_streams: durations differ");
    out.timestamps_ns.insert(out.timestamps_ns.end(), s.timestamps_ns.begin(),
                             s.timestamps_ns.end());
  }
  std::sort(out.timestamps_ns.begin(), out.timestamps_ns.end());
  return out;
}

// Normalized coincidence histogram over all ordered pairs within max_delay,
// equivalent to the long-integration-time limit of a start-stop HBT trace.
// Bin k covers delays within half a bin width of k*bin_width; the zero bin is
// doubled because its negative-delay mirror coincides with it.
inline G2Histogram coincidence_histogram(const ClickStream& stream, double bin_width_ns,
                                         double max_delay_ns) {
  if (!(bin_width_ns > 0.0)) throw std::invalid_argument("bin_width_ns must be > 0");
  if (!(max_delay_ns > bin_width_ns))
    throw std::invalid_argument("max_delay_ns must exceed bin_width_ns");
  const auto& ts = stream.timestamps_ns;
  if (ts.size() < 100)
    throw std::invalid_argument("coincidence_histogram needs >= 100 clicks, got " +
                                std::to_string(ts.size()));

  const long long m = std::llround(max_delay_ns / bin_width_ns);
  std::vector<double> raw(static_cast<std::size_t>(m) + 1, 0.0);
  const double edge = (static_cast<double>(m) + 0.5) * bin_width_ns;

  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      const double d = ts[j] - ts[i];
      if (d > edge) break;
      const long long k = std::llround(d / bin_width_ns);
      if (k <= m) raw[static_cast<std::size_t>(k)] += 1.0;
    }
  }

  const double n = static_cast<double>(ts.size());
  const double norm = n * n * bin_width_ns / stream.duration_ns;

  std::vector<G2Bin> bins;
  bins.reserve(2 * static_cast<std::size_t>(m) + 1);
  for (long long k = m; k >= 1; --k)
    bins.push_back({-static_cast<double>(k) * bin_width_ns,
                    raw[static_cast<std::size_t>(k)] / norm});
  bins.push_back({0.0, 2.0 * raw[0] / norm});
  for (long long k = 1; k <= m; ++k)
    bins.push_back({static_cast<double>(k) * bin_width_ns,
                    raw[static_cast<std::size_t>(k)] / norm});
  G2Histogram h;
  h.bins = std::move(bins);
  return h;
}

// Closed-form stationary intensity of the three-level scheme plus background,
// in clicks per ns.
inline double steady_state_intensity(const EmitterRates& r) {
  validate_rates(r);
  double pe = 0.0;
  if (r.k_sh_per_ns > 0.0 && r.k_des_per_ns <= 0.0) {
    pe = 0.0;  // population drains into the shelf
  } else {
    const double kd = r.k_des_per_ns;
    const double denom =
        kd * (r.k_exc_per_ns + r.k_rad_per_ns + r.k_sh_per_ns) + r.k_exc_per_ns * r.k_sh_per_ns;
    pe = (r.k_sh_per_ns <= 0.0)
             ? r.k_exc_per_ns / (r.k_exc_per_ns + r.k_rad_per_ns)
             : r.k_exc_per_ns * kd / denom;
  }
  return r.detection_efficiency * r.k_rad_per_ns * pe + r.background_per_ns;
}

}  // namespace zplkit
