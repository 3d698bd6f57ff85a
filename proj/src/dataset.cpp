#include "triax/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "triax/ops.hpp"
#include "triax/tensor_io.hpp"

namespace triax {

void Dataset::validate() const {
  if (features.empty()) throw ConfigError("dataset is empty");
  if (labels.rank() != 2 || labels.dim(0) != features.size())
    throw ShapeError("dataset has " + std::to_string(features.size()) + " samples but labels " +
                     shape_str(labels.shape()));
  const Shape& s = features.front().shape();
  if (s.size() != 4) throw ShapeError("samples must be T x W' x H' x C', got " + shape_str(s));
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].shape() != s)
      throw ShapeError("sample " + std::to_string(i) + " has shape " +
                       shape_str(features[i].shape()) + ", expected " + shape_str(s));
  for (double v : labels.data())
    if (v != 0.0 && v != 1.0) throw ConfigError("dataset labels must be binary");
}

Tensor Dataset::label_row(std::size_t i) const {
  const auto r = labels.row(i);
  return Tensor({r.size()}, std::vector<double>(r.begin(), r.end()));
}

namespace {
std::string sample_name(std::size_t i) {
  std::ostringstream os;
  os << "sample_" << std::setw(6) << std::setfill('0') << i << ".tnsr";
  return os.str();
}
}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  data.validate();
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < data.size(); ++i) save_tnsr(dir / sample_name(i), data.features[i]);
  std::ofstream os(dir / "labels.csv");
  if (!os) throw IoError("cannot write " + (dir / "labels.csv").string());
  const std::size_t A = data.activities();
  for (std::size_t n = 0; n < data.size(); ++n) {
    for (std::size_t a = 0; a < A; ++a) os << (a ? "," : "") << static_cast<int>(data.labels[n * A + a]);
    os << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "labels.csv");
  if (!is) throw IoError("missing " + (dir / "labels.csv").string());
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (cell != "0" && cell != "1")
        throw IoError("labels.csv row " + std::to_string(rows) + ": non-binary value '" + cell + "'");
      values.push_back(cell == "1" ? 1.0 : 0.0);
      ++c;
    }
    if (rows == 0) cols = c;
    if (c != cols) throw IoError("labels.csv row " + std::to_string(rows) + " is ragged");
    ++rows;
  }
  if (rows == 0 || cols == 0) throw IoError("labels.csv is empty");

  Dataset d;
  d.labels = Tensor({rows, cols}, std::move(values));
  for (std::size_t i = 0; i < rows; ++i) d.features.push_back(load_tnsr(dir / sample_name(i)));
  d.validate();
  return d;
}

Tensor collect_descriptors(const Dataset& data, std::size_t max_rows, std::uint64_t seed) {
  data.validate();
  const std::size_t C = data.features.front().shape().back();
  const std::size_t per_sample = data.features.front().size() / C;
  const std::size_t total = per_sample * data.size();
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t n = std::min(max_rows, total);
  // partial Fisher-Yates: the first n entries become a uniform sample
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng() % (total - i)]);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));

  Tensor out({n, C});
  for (std::size_t r = 0; r < n; ++r) {
    const Tensor& fm = data.features[idx[r] / per_sample];
    const std::size_t off = (idx[r] % per_sample) * C;
    std::copy_n(fm.data().begin() + static_cast<std::ptrdiff_t>(off), C, out.row(r).begin());
  }
  return out;
}

}  // namespace triax
