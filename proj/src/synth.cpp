#include "triax/synth.hpp"

#include <cmath>
#include <random>
#include <string>

#include "triax/ops.hpp"

namespace triax {

namespace {
constexpr double kCouplingTol = 1e-12;

// partner[i] is the coupled activity of i, or i itself when independent.
std::vector<std::size_t> partners(const SynthSpec& s) {
  const std::size_t A = s.activities;
  std::vector<std::size_t> partner(A);
  for (std::size_t i = 0; i < A; ++i) {
    partner[i] = i;
    for (std::size_t j = 0; j < A; ++j) {
      if (i == j || std::abs(s.cooccurrence[i * A + j] - s.rates[j]) <= kCouplingTol) continue;
      if (partner[i] != i)
        throw ConfigError("synth: activity " + std::to_string(i) +
                          " is coupled to more than one other activity");
      partner[i] = j;
    }
  }
  return partner;
}
}  // namespace

void SynthSpec::fill_defaults() {
  const std::size_t A = activities;
  if (rates.empty()) rates.assign(A, 0.3);
  if (amplitude.empty()) amplitude.assign(A, 1.0);
  if (cooccurrence.empty() && A > 0) {
    cooccurrence = Tensor({A, A});
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < A; ++j) cooccurrence[i * A + j] = i == j ? 1.0 : rates[j];
  }
  if (cells.empty()) {
    const std::size_t S = grid_w * grid_h;
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t idx = S >= A ? (a * S) / A : a % S;
      cells.emplace_back(idx / grid_h, idx % grid_h);
    }
  }
  if (windows.empty()) {
    const std::size_t len = std::max<std::size_t>(1, frames / 2);
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t start = A > 1 ? (a * (frames - len)) / (A - 1) : 0;
      windows.emplace_back(start, start + len);
    }
  }
}

void SynthSpec::validate() const {
  if (samples == 0 || frames == 0 || grid_w == 0 || grid_h == 0 || channels == 0 || activities == 0)
    throw ConfigError("synth: all extents and the sample count must be >= 1");
  const std::size_t A = activities;
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
  if (rates.size() != A || amplitude.size() != A || cells.size() != A || windows.size() != A)
    throw ConfigError("synth: rates, amplitude, cells and windows need one entry per activity");
  for (double r : rates)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("synth: rates must be in [0,1]");
  for (std::size_t a = 0; a < A; ++a) {
    if (cells[a].first >= grid_w || cells[a].second >= grid_h)
      throw ConfigError("synth: cell of activity " + std::to_string(a) + " is outside the grid");
    if (windows[a].first >= windows[a].second || windows[a].second > frames)
      throw ConfigError("synth: window of activity " + std::to_string(a) + " is outside [0, T)");
  }
  if (cooccurrence.shape() != Shape{A, A}) throw ConfigError("synth: cooccurrence must be A x A");
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < A; ++j) {
      const double v = cooccurrence[i * A + j];
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("synth: cooccurrence entries must be in [0,1]");
      if (i == j && v != 1.0) throw ConfigError("synth: cooccurrence diagonal must be 1");
    }
  const auto partner = partners(*this);
  for (std::size_t i = 0; i < A; ++i) {
    const std::size_t j = partner[i];
    if (j == i) continue;
    if (partner[j] != i)
      throw ConfigError("synth: coupling between " + std::to_string(i) + " and " +
                        std::to_string(j) + " is not mutual");
    if (rates[i] != rates[j])
      throw ConfigError("synth: coupled activities " + std::to_string(i) + " and " +
                        std::to_string(j) + " need equal rates");
    const double q = cooccurrence[i * A + j], p = rates[i];
    if (q != cooccurrence[j * A + i])
      throw ConfigError("synth: coupled activities " + std::to_string(i) + " and " +
                        std::to_string(j) + " need the same co-occurrence both ways");
    if ((2.0 - q) * p > 1.0 + 1e-12)
      throw ConfigError("synth: coupling q=" + std::to_string(q) + " is infeasible at rate " +
                        std::to_string(p));
  }
}

Tensor SynthSpec::signatures() const {
  Rng rng(signature_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor sig({activities, channels});
  for (std::size_t a = 0; a < activities; ++a) {
    auto row = sig.row(a);
    double sq = 0.0;
    for (auto& v : row) {
      v = normal(rng);
      sq += v * v;
    }
    const double scale = amplitude[a] / std::sqrt(sq / static_cast<double>(channels));
    for (auto& v : row) v *= scale;
  }
  return sig;
}

Dataset synth_dataset(SynthSpec spec, std::uint64_t seed) {
  spec.fill_defaults();
  spec.validate();
  const std::size_t A = spec.activities, C = spec.channels;
  const std::size_t W = spec.grid_w, H = spec.grid_h, T = spec.frames;
  const auto partner = partners(spec);
  const Tensor sig = spec.signatures();

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.labels = Tensor({spec.samples, A});
  for (std::size_t n = 0; n < spec.samples; ++n) {
    auto label = d.labels.row(n);
    for (std::size_t i = 0; i < A; ++i) {
      const std::size_t j = partner[i];
      if (j == i) {
        label[i] = uniform01(rng) < spec.rates[i] ? 1.0 : 0.0;
      } else if (i < j) {
        const double p = spec.rates[i], q = spec.cooccurrence[i * A + j];
        const double u = uniform01(rng);
        const double both = q * p, single = (1.0 - q) * p;
        label[i] = u < both + single ? 1.0 : 0.0;
        label[j] = (u < both || (u >= both + single && u < both + 2.0 * single)) ? 1.0 : 0.0;
      }
    }

    Tensor fm({T, W, H, C});
    if (spec.noise > 0.0)
      for (auto& v : fm.data()) v = spec.noise * normal(rng);
    for (std::size_t a = 0; a < A; ++a) {
      if (label[a] == 0.0) continue;
      const auto [w, h] = spec.cells[a];
      for (std::size_t t = spec.windows[a].first; t < spec.windows[a].second; ++t)
        for (std::size_t c = 0; c < C; ++c) fm.at(t, w, h, c) += sig[a * C + c];
    }
    d.features.push_back(std::move(fm));
  }
  return d;
}

}  // namespace triax
