#include "ntkeig/ntk.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ntkeig/rng.hpp"

namespace ntkeig {

namespace {

double relu(double z) { return z > 0.0 ? z : 0.0; }
double relu_dot(double z) { return z > 0.0 ? 1.0 : 0.0; }  // relu'(0) = 0 by convention

template <typename Block>
void fill_gaussian_row(Block row, std::uint64_t seed) {
  GaussianStream g(seed);
  for (Eigen::Index c = 0; c < row.size(); ++c) row(c) = g.next();
}

}  // namespace

ShallowParams init_shallow(int d0, int d1, std::uint64_t seed) {
  if (d0 < 1 || d1 < 1) throw std::domain_error("init_shallow: requires d0 >= 1 and d1 >= 1");
  ShallowParams p{d0, d1, Matrix(d1, d0), Vector(d1), seed};
  for (int j = 0; j < d1; ++j) {
    fill_gaussian_row(p.W.row(j), derive_seed(seed, streams::kWeightRow, j));
    GaussianStream g(derive_seed(seed, streams::kOuterWeight, j));
    p.v(j) = g.next();
  }
  return p;
}

DeepParams init_deep(std::vector<int> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw std::domain_error("init_deep: need at least input and output widths");
  if (widths.back() != 1) throw std::invalid_argument("init_deep: output width d_L must be 1");
  for (int w : widths)
    if (w < 1) throw std::domain_error("init_deep: all widths must be >= 1");
  DeepParams p{std::move(widths), {}, seed};
  const int L = static_cast<int>(p.widths.size()) - 1;
  p.weights.reserve(L);
  for (int l = 1; l <= L; ++l) {
    Matrix w(p.widths[l], p.widths[l - 1]);
    for (int j = 0; j < p.widths[l]; ++j)
      fill_gaussian_row(w.row(j), derive_seed(seed, streams::kDeepLayer + l, j));
    p.weights.push_back(std::move(w));
  }
  return p;
}

double shallow_forward(const ShallowParams& p, const Vector& x) {
  if (x.size() != p.d0) throw std::invalid_argument("shallow_forward: dimension mismatch");
  const Vector pre = p.W * x;
  double sum = 0.0;
  for (int j = 0; j < p.d1; ++j) sum += p.v(j) * relu(pre(j));
  return sum / std::sqrt(static_cast<double>(p.d1));
}

namespace {

struct ShallowAccumulator {
  Matrix k1_weight;  // running sum of v_j^2 relu'(w_j.x_i) relu'(w_j.x_k)
  Matrix k2;         // running sum of relu(w_j.x_i) relu(w_j.x_k)

  explicit ShallowAccumulator(int n) : k1_weight(Matrix::Zero(n, n)), k2(Matrix::Zero(n, n)) {}

  void add_block(const Matrix& pre, const Vector& v_block) {
    const Eigen::Index rows = pre.rows();
    Matrix gated(rows, pre.cols());
    Matrix active(rows, pre.cols());
    for (Eigen::Index j = 0; j < rows; ++j)
      for (Eigen::Index i = 0; i < pre.cols(); ++i) {
        gated(j, i) = v_block(j) * relu_dot(pre(j, i));
        active(j, i) = relu(pre(j, i));
      }
    k1_weight.noalias() += gated.transpose() * gated;
    k2.noalias() += active.transpose() * active;
  }

  NtkParts finish(int d1, const Matrix& data_gram) const {
    const double inv = 1.0 / static_cast<double>(d1);
    Matrix k1 = (inv * k1_weight).cwiseProduct(data_gram);
    Matrix k2_scaled = inv * k2;
    Matrix k = k1 + k2_scaled;
    return {KernelMatrix(std::move(k)), KernelMatrix(std::move(k1)),
            KernelMatrix(std::move(k2_scaled))};
  }
};

}  // namespace

NtkParts shallow_ntk(const ShallowParams& p, const Dataset& data) {
  if (data.dim() != p.d0) throw std::invalid_argument("shallow_ntk: dimension mismatch");
  ShallowAccumulator acc(data.size());
  const Matrix pre = p.W * data.points();
  acc.add_block(pre, p.v);
  return acc.finish(p.d1, data.gram());
}

NtkParts shallow_ntk_streamed(int d0, int d1, std::uint64_t seed, const Dataset& data) {
  if (data.dim() != d0) throw std::invalid_argument("shallow_ntk_streamed: dimension mismatch");
  if (d0 < 1 || d1 < 1)
    throw std::domain_error("shallow_ntk_streamed: requires d0 >= 1 and d1 >= 1");
  constexpr int kChunk = 8192;
  ShallowAccumulator acc(data.size());
  Matrix w_chunk(std::min(kChunk, d1), d0);
  Vector v_chunk(std::min(kChunk, d1));
  for (int begin = 0; begin < d1; begin += kChunk) {
    const int rows = std::min(kChunk, d1 - begin);
    for (int j = 0; j < rows; ++j) {
      fill_gaussian_row(w_chunk.row(j), derive_seed(seed, streams::kWeightRow, begin + j));
      GaussianStream g(derive_seed(seed, streams::kOuterWeight, begin + j));
      v_chunk(j) = g.next();
    }
    const Matrix pre = w_chunk.topRows(rows) * data.points();
    acc.add_block(pre, v_chunk.head(rows));
  }
  return acc.finish(d1, data.gram());
}

double gradient_distance(const ShallowParams& p, const Vector& x, const Vector& x_prime) {
  if (x.size() != p.d0 || x_prime.size() != p.d0)
    throw std::invalid_argument("gradient_distance: dimension mismatch");
  const Vector pre_x = p.W * x;
  const Vector pre_y = p.W * x_prime;
  double w_block = 0.0;
  double v_block = 0.0;
  for (int j = 0; j < p.d1; ++j) {
    const double a = relu_dot(pre_x(j));
    const double b = relu_dot(pre_y(j));
    w_block += p.v(j) * p.v(j) * (a * x - b * x_prime).squaredNorm();
    const double dv = relu(pre_x(j)) - relu(pre_y(j));
    v_block += dv * dv;
  }
  return std::sqrt((w_block + v_block) / static_cast<double>(p.d1));
}

LayerTrace deep_trace(const DeepParams& p, const Dataset& data) {
  if (data.dim() != p.widths.front()) throw std::invalid_argument("deep_trace: dimension mismatch");
  const int L = p.depth();
  const int n = data.size();

  LayerTrace trace;
  trace.features.reserve(L);
  trace.features.push_back(data.points());
  trace.patterns.reserve(L - 1);
  for (int l = 1; l <= L - 1; ++l) {
    const Matrix pre = p.weights[l - 1] * trace.features.back();
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> pattern(pre.rows(), pre.cols());
    Matrix post(pre.rows(), pre.cols());
    for (Eigen::Index j = 0; j < pre.rows(); ++j)
      for (Eigen::Index i = 0; i < pre.cols(); ++i) {
        pattern(j, i) = pre(j, i) > 0.0 ? 1 : 0;
        post(j, i) = relu(pre(j, i));
      }
    trace.patterns.push_back(std::move(pattern));
    trace.features.push_back(std::move(post));
  }

  // B_l rows via the backward recursion g_{L-1} = mask_{L-1} o W_L^T,
  // g_l = mask_l o (W_{l+1}^T g_{l+1}).
  trace.backprop.assign(L, Matrix());
  for (int l = 1; l <= L - 1; ++l) trace.backprop[l - 1] = Matrix(n, p.widths[l]);
  trace.backprop[L - 1] = Matrix::Ones(n, 1);
  const Vector w_last = p.weights[L - 1].row(0).transpose();
  for (int i = 0; i < n; ++i) {
    Vector g = w_last;
    for (int l = L - 1; l >= 1; --l) {
      for (int j = 0; j < p.widths[l]; ++j)
        if (!trace.patterns[l - 1](j, i)) g(j) = 0.0;
      trace.backprop[l - 1].row(i) = g.transpose();
      if (l > 1) g = p.weights[l - 1].transpose() * g;
    }
  }
  return trace;
}

KernelMatrix deep_ntk_decomposed(const DeepParams& p, const Dataset& data) {
  const LayerTrace trace = deep_trace(p, data);
  const int L = p.depth();
  const int n = data.size();
  Matrix acc = Matrix::Zero(n, n);
  for (int l = 0; l <= L - 1; ++l) {
    const Matrix feature_gram = trace.features[l].transpose() * trace.features[l];
    const Matrix backprop_gram = trace.backprop[l] * trace.backprop[l].transpose();
    acc += feature_gram.cwiseProduct(backprop_gram);
  }
  double scale = 1.0;
  for (int l = 1; l <= L - 1; ++l) scale *= 2.0 / p.widths[l];
  return KernelMatrix(scale * acc);
}

namespace {

// forward pass of the normalized map on all points for a given weight set
Vector deep_forward_all(const std::vector<Matrix>& weights, const std::vector<int>& widths,
                        const Matrix& points) {
  const int L = static_cast<int>(weights.size());
  Matrix cur = points;
  for (int l = 1; l <= L - 1; ++l)
    cur = (weights[l - 1] * cur).cwiseMax(0.0).eval();
  Vector out = (weights[L - 1] * cur).row(0).transpose();
  double scale = 1.0;
  for (int l = 1; l <= L - 1; ++l) scale *= std::sqrt(2.0 / widths[l]);
  return scale * out;
}

}  // namespace

double deep_general_position_margin(const DeepParams& p, const Dataset& data) {
  const int L = p.depth();
  Matrix cur = data.points();
  double margin = std::numeric_limits<double>::infinity();
  for (int l = 1; l <= L - 1; ++l) {
    const Matrix pre = p.weights[l - 1] * cur;
    margin = std::min(margin, pre.cwiseAbs().minCoeff());
    cur = pre.cwiseMax(0.0);
  }
  return margin;
}

KernelMatrix deep_ntk_fd(const DeepParams& p, const Dataset& data, double h) {
  if (data.dim() != p.widths.front()) throw std::invalid_argument("deep_ntk_fd: dimension mismatch");
  if (!(h > 0.0)) throw std::invalid_argument("deep_ntk_fd: step must be positive");
  const int L = p.depth();
  const int n = data.size();

  // general-position guard: no ReLU pre-activation within 10h of its kink
  {
    std::vector<GeneralPositionViolation> violations;
    Matrix cur = data.points();
    for (int l = 1; l <= L - 1; ++l) {
      const Matrix pre = p.weights[l - 1] * cur;
      for (Eigen::Index j = 0; j < pre.rows(); ++j)
        for (Eigen::Index i = 0; i < pre.cols(); ++i)
          if (std::abs(pre(j, i)) < 10.0 * h)
            violations.push_back({l, static_cast<int>(i), static_cast<int>(j), pre(j, i)});
      cur = pre.cwiseMax(0.0);
    }
    if (!violations.empty()) {
      std::ostringstream msg;
      msg << "deep_ntk_fd: " << violations.size()
          << " pre-activation(s) within 10h of the ReLU kink (first at layer "
          << violations.front().layer << ", point " << violations.front().point << ", unit "
          << violations.front().unit << "); resample the seed";
      throw GeneralPositionError(msg.str(), std::move(violations));
    }
  }

  int total_params = 0;
  for (int l = 1; l <= L; ++l) total_params += p.widths[l] * p.widths[l - 1];

  Matrix jacobian(total_params, n);
  std::vector<Matrix> weights = p.weights;
  int row = 0;
  for (int l = 0; l < L; ++l) {
    for (Eigen::Index j = 0; j < weights[l].rows(); ++j)
      for (Eigen::Index c = 0; c < weights[l].cols(); ++c) {
        const double saved = weights[l](j, c);
        weights[l](j, c) = saved + h;
        const Vector plus = deep_forward_all(weights, p.widths, data.points());
        weights[l](j, c) = saved - h;
        const Vector minus = deep_forward_all(weights, p.widths, data.points());
        weights[l](j, c) = saved;
        jacobian.row(row++) = ((plus - minus) / (2.0 * h)).transpose();
      }
  }
  return KernelMatrix(jacobian.transpose() * jacobian);
}

double min_eigenvalue(const KernelMatrix& kernel) { return min_eigenvalue_report(kernel).lambda_min; }

std::vector<double> feature_norm_profile(const DeepParams& p, const Vector& x) {
  if (x.size() != p.widths.front())
    throw std::invalid_argument("feature_norm_profile: dimension mismatch");
  const int L = p.depth();
  std::vector<double> ratios;
  ratios.reserve(L - 1);
  Vector cur = x;
  double scale = 1.0;
  for (int l = 1; l <= L - 1; ++l) {
    cur = (p.weights[l - 1] * cur).cwiseMax(0.0).eval();
    scale *= 0.5 * p.widths[l];
    ratios.push_back(cur.squaredNorm() / scale);
  }
  return ratios;
}

std::vector<BackpropNorms> backprop_norm_profile(const DeepParams& p, const Vector& x) {
  if (x.size() != p.widths.front())
    throw std::invalid_argument("backprop_norm_profile: dimension mismatch");
  const int L = p.depth();

  // forward masks
  std::vector<Vector> masks(L - 1);
  Vector cur = x;
  for (int l = 1; l <= L - 1; ++l) {
    const Vector pre = p.weights[l - 1] * cur;
    masks[l - 1] = Vector(pre.size());
    for (Eigen::Index j = 0; j < pre.size(); ++j) masks[l - 1](j) = relu_dot(pre(j));
    cur = pre.cwiseMax(0.0);
  }

  // S_l backwards: S_{L-1} = diag(mask), S_l = diag(mask_l) W_{l+1}^T S_{l+1}
  const Vector w_last = p.weights[L - 1].row(0).transpose();
  std::vector<BackpropNorms> profile(L - 1);
  Matrix s = masks[L - 2].asDiagonal();  // S_{L-1}, d_{L-1} x d_{L-1}
  for (int l = L - 1; l >= 1; --l) {
    if (l < L - 1) {
      Matrix lifted = p.weights[l].transpose() * s;
      for (Eigen::Index j = 0; j < lifted.rows(); ++j)
        if (masks[l - 1](j) == 0.0) lifted.row(j).setZero();
      s = std::move(lifted);
    }
    BackpropNorms norms;
    norms.sw_sq = (s * w_last).squaredNorm();
    norms.frob_sq = s.squaredNorm();
    const Vector eig = jacobi_eigenvalues(s.transpose() * s);
    norms.op_sq = std::max(eig(eig.size() - 1), 0.0);
    profile[l - 1] = norms;
  }
  return profile;
}

double activation_flip_rate(double theta, int d, std::int64_t samples, std::uint64_t seed) {
  if (d < 2) throw std::domain_error("activation_flip_rate: requires d >= 2");
  if (samples < 1) throw std::invalid_argument("activation_flip_rate: samples must be >= 1");
  const double cx = std::cos(theta);
  const double sx = std::sin(theta);
  GaussianStream g(derive_seed(seed, streams::kMonteCarloShard, 0));
  std::int64_t flips = 0;
  for (std::int64_t s = 0; s < samples; ++s) {
    double w0 = g.next();
    double w1 = g.next();
    for (int k = 2; k < d; ++k) (void)g.next();  // draw the full row for stream stability
    const double a = relu_dot(w0);
    const double b = relu_dot(cx * w0 + sx * w1);
    flips += (a != b) ? 1 : 0;
  }
  return static_cast<double>(flips) / static_cast<double>(samples);
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}
Matrix read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), 8);
      m(r, c) = v;
    }
  return m;
}

constexpr char kMagic[4] = {'N', 'T', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindShallow = 1;
constexpr std::uint32_t kKindDeep = 2;

void write_header(std::ostream& out, std::uint32_t kind, std::uint64_t seed,
                  const std::vector<int>& widths) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, kind);
  write_u32(out, static_cast<std::uint32_t>(widths.size()));
  write_u64(out, seed);
  for (int w : widths) write_u64(out, static_cast<std::uint64_t>(w));
}

std::vector<int> read_header(std::istream& in, std::uint32_t expected_kind, std::uint64_t& seed) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("params: bad magic, not a parameter container");
  if (read_u32(in) != kVersion) throw std::runtime_error("params: unsupported container version");
  if (read_u32(in) != expected_kind) throw std::runtime_error("params: container kind mismatch");
  const std::uint32_t count = read_u32(in);
  seed = read_u64(in);
  std::vector<int> widths(count);
  for (auto& w : widths) w = static_cast<int>(read_u64(in));
  return widths;
}

}  // namespace

void save_params_binary(const ShallowParams& p, std::ostream& out) {
  write_header(out, kKindShallow, p.seed, {p.d0, p.d1});
  write_matrix(out, p.W);
  write_matrix(out, p.v);
}

void save_params_binary(const DeepParams& p, std::ostream& out) {
  write_header(out, kKindDeep, p.seed, p.widths);
  for (const Matrix& w : p.weights) write_matrix(out, w);
}

ShallowParams load_shallow_params_binary(std::istream& in) {
  std::uint64_t seed = 0;
  const std::vector<int> widths = read_header(in, kKindShallow, seed);
  if (widths.size() != 2) throw std::runtime_error("params: shallow container must have two widths");
  ShallowParams p{widths[0], widths[1], read_matrix(in, widths[1], widths[0]),
                  read_matrix(in, widths[1], 1), seed};
  if (!in) throw std::runtime_error("params: truncated container");
  return p;
}

DeepParams load_deep_params_binary(std::istream& in) {
  std::uint64_t seed = 0;
  std::vector<int> widths = read_header(in, kKindDeep, seed);
  if (widths.size() < 2 || widths.back() != 1)
    throw std::runtime_error("params: malformed deep container widths");
  DeepParams p{widths, {}, seed};
  for (std::size_t l = 1; l < widths.size(); ++l)
    p.weights.push_back(read_matrix(in, widths[l], widths[l - 1]));
  if (!in) throw std::runtime_error("params: truncated container");
  return p;
}

namespace {
nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}
}  // namespace

void write_params_json(const ShallowParams& p, std::ostream& out) {
  nlohmann::json j;
  j["kind"] = "shallow";
  j["d0"] = p.d0;
  j["d1"] = p.d1;
  j["seed"] = p.seed;
  j["W"] = matrix_to_json(p.W);
  j["v"] = matrix_to_json(p.v);
  out << j.dump(2) << '\n';
}

void write_params_json(const DeepParams& p, std::ostream& out) {
  nlohmann::json j;
  j["kind"] = "deep";
  j["widths"] = p.widths;
  j["seed"] = p.seed;
  auto weights = nlohmann::json::array();
  for (const Matrix& w : p.weights) weights.push_back(matrix_to_json(w));
  j["weights"] = std::move(weights);
  out << j.dump(2) << '\n';
}

void write_layer_trace_csv(const LayerTrace& trace, std::ostream& out) {
  out << "layer,quantity,value\n";
  char buf[64];
  const auto emit = [&](int layer, const char* quantity, double value) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out << layer << ',' << quantity << ',' << buf << '\n';
  };
  for (std::size_t l = 0; l < trace.features.size(); ++l)
    emit(static_cast<int>(l), "feature_frobenius_sq", trace.features[l].squaredNorm());
  for (std::size_t l = 0; l < trace.patterns.size(); ++l) {
    double active = 0.0;
    for (Eigen::Index j = 0; j < trace.patterns[l].rows(); ++j)
      for (Eigen::Index i = 0; i < trace.patterns[l].cols(); ++i)
        active += trace.patterns[l](j, i);
    emit(static_cast<int>(l + 1), "active_fraction",
         active / static_cast<double>(trace.patterns[l].size()));
  }
  for (std::size_t l = 0; l < trace.backprop.size(); ++l)
    emit(static_cast<int>(l + 1), "backprop_frobenius_sq", trace.backprop[l].squaredNorm());
}

}  // namespace ntkeig
