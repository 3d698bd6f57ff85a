#include "triax/activity_attention.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace triax {

ActivityAttentionBank ActivityAttentionBank::uniform(std::size_t activities, std::size_t width,
                                                     std::size_t height) {
  return {Tensor({activities, width, height}, 1.0 / static_cast<double>(width * height))};
}

namespace {
void check_spatial(const Tensor& fcf, const ActivityAttentionBank& bank) {
  if (fcf.rank() != 4)
    throw ShapeError("clustered feature map must be T x W x H x F, got " + shape_str(fcf.shape()));
  if (bank.masks.rank() != 3 || fcf.dim(1) != bank.width() || fcf.dim(2) != bank.height())
    throw ShapeError("activity masks " + shape_str(bank.masks.shape()) +
                     " do not match feature grid " + shape_str(fcf.shape()));
}
}  // namespace

Tensor activity_attend(const Tensor& fcf, const ActivityAttentionBank& bank) {
  check_spatial(fcf, bank);
  const std::size_t T = fcf.dim(0), S = fcf.dim(1) * fcf.dim(2), F = fcf.dim(3);
  const std::size_t A = bank.activities();
  Tensor out({T, A, F});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t a = 0; a < A; ++a) {
      double* dst = out.data().data() + (t * A + a) * F;
      const double* mask = bank.masks.data().data() + a * S;
      for (std::size_t s = 0; s < S; ++s) {
        const double m = mask[s];
        const double* src = fcf.data().data() + (t * S + s) * F;
        for (std::size_t f = 0; f < F; ++f) dst[f] += m * src[f];
      }
    }
  return out;
}

void activity_attend_backward(const Tensor& fcf, const ActivityAttentionBank& bank,
                              const Tensor& grad_out, Tensor& grad_masks, Tensor* grad_fcf) {
  check_spatial(fcf, bank);
  const std::size_t T = fcf.dim(0), S = fcf.dim(1) * fcf.dim(2), F = fcf.dim(3);
  const std::size_t A = bank.activities();
  if (grad_out.shape() != Shape{T, A, F})
    throw ShapeError("activity_attend_backward: gradient " + shape_str(grad_out.shape()));
  if (grad_masks.shape() != bank.masks.shape()) grad_masks = zeros_like(bank.masks);
  if (grad_fcf) *grad_fcf = zeros_like(fcf);

  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t a = 0; a < A; ++a) {
      const double* g = grad_out.data().data() + (t * A + a) * F;
      const double* mask = bank.masks.data().data() + a * S;
      double* gm = grad_masks.data().data() + a * S;
      for (std::size_t s = 0; s < S; ++s) {
        const double* src = fcf.data().data() + (t * S + s) * F;
        double acc = 0.0;
        for (std::size_t f = 0; f < F; ++f) acc += g[f] * src[f];
        gm[s] += acc;
        if (grad_fcf) {
          double* gf = grad_fcf->data().data() + (t * S + s) * F;
          for (std::size_t f = 0; f < F; ++f) gf[f] += mask[s] * g[f];
        }
      }
    }
}

Tensor spatial_mean_broadcast(const Tensor& fcf, std::size_t activities) {
  if (fcf.rank() != 4) throw ShapeError("spatial_mean_broadcast expects T x W x H x F");
  const std::size_t T = fcf.dim(0), S = fcf.dim(1) * fcf.dim(2), F = fcf.dim(3);
  Tensor out({T, activities, F});
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> mean(F, 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t f = 0; f < F; ++f) mean[f] += fcf[(t * S + s) * F + f];
    for (auto& m : mean) m /= static_cast<double>(S);
    for (std::size_t a = 0; a < activities; ++a)
      std::copy(mean.begin(), mean.end(), out.data().begin() + (t * activities + a) * F);
  }
  return out;
}

Tensor spatial_mean_broadcast_backward(const Tensor& fcf_shape_ref, const Tensor& grad_out) {
  const std::size_t T = fcf_shape_ref.dim(0);
  const std::size_t S = fcf_shape_ref.dim(1) * fcf_shape_ref.dim(2), F = fcf_shape_ref.dim(3);
  const std::size_t A = grad_out.dim(1);
  Tensor g(fcf_shape_ref.shape());
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> acc(F, 0.0);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t f = 0; f < F; ++f) acc[f] += grad_out[(t * A + a) * F + f];
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t f = 0; f < F; ++f) g[(t * S + s) * F + f] = acc[f] / static_cast<double>(S);
  }
  return g;
}

std::vector<Tensor> export_activity_maps(const ActivityAttentionBank& bank, const Tensor& fcf) {
  check_spatial(fcf, bank);
  const std::size_t T = fcf.dim(0), W = fcf.dim(1), H = fcf.dim(2), F = fcf.dim(3);
  Tensor energy({W, H});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t s = 0; s < W * H; ++s) {
      double sq = 0.0;
      for (std::size_t f = 0; f < F; ++f) {
        const double v = fcf[(t * W * H + s) * F + f];
        sq += v * v;
      }
      energy[s] += std::sqrt(sq);
    }
  for (auto& e : energy.data()) e /= static_cast<double>(T);

  std::vector<Tensor> maps;
  for (std::size_t a = 0; a < bank.activities(); ++a) {
    Tensor grid({W, H});
    for (std::size_t s = 0; s < W * H; ++s) grid[s] = bank.masks[a * W * H + s] * energy[s];
    maps.push_back(std::move(grid));
  }
  return maps;
}

std::vector<std::filesystem::path> write_activity_maps(const std::filesystem::path& dir,
                                                       const std::vector<Tensor>& maps,
                                                       bool with_pgm) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t a = 0; a < maps.size(); ++a) {
    const Tensor& m = maps[a];
    const std::size_t W = m.dim(0), H = m.dim(1);
    const auto txt = dir / ("activity_" + std::to_string(a) + ".txt");
    std::ofstream os(txt);
    if (!os) throw IoError("cannot write " + txt.string());
    os << std::setprecision(17);
    for (std::size_t w = 0; w < W; ++w) {
      for (std::size_t h = 0; h < H; ++h) os << (h ? " " : "") << m[w * H + h];
      os << '\n';
    }
    written.push_back(txt);

    if (!with_pgm) continue;
    const auto [lo_it, hi_it] = std::minmax_element(m.data().begin(), m.data().end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    const auto pgm = dir / ("activity_" + std::to_string(a) + ".pgm");
    std::ofstream ps(pgm, std::ios::binary);
    if (!ps) throw IoError("cannot write " + pgm.string());
    // rows of the image are the H axis, columns the W axis
    ps << "P5\n" << W << ' ' << H << "\n255\n";
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        const double v = span > 0.0 ? (m[w * H + h] - lo) / span : 0.0;
        ps.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    written.push_back(pgm);
  }
  return written;
}

}  // namespace triax
