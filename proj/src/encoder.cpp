#include "setad/encoder.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "setad/error.hpp"
#include "setad/random.hpp"

namespace setad::encoder {

bool operator==(const ModelParams& a, const ModelParams& b) {
  return a.shape == b.shape && serialize(a) == serialize(b);
}

void validate_shape(const ModelShape& shape) {
  if (shape.input_dim < 1) throw Error(ErrorKind::config, "model input dimension must be >= 1");
  if (shape.latent_dim < 1 || shape.heads < 1) {
    throw Error(ErrorKind::config, "latent width and head count must be >= 1");
  }
  if (shape.latent_dim % shape.heads != 0) {
    throw Error(ErrorKind::config, "latent width " + std::to_string(shape.latent_dim) +
                                       " is not divisible by head count " +
                                       std::to_string(shape.heads));
  }
  if (shape.depth < 1) throw Error(ErrorKind::config, "attention depth must be >= 1");
}

namespace {

Matrix glorot_uniform(Rng& rng, std::size_t rows, std::size_t cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

}  // namespace

WeightSet<Matrix> zeros_like(const ModelShape& shape) {
  const std::size_t dh = shape.latent_dim;
  WeightSet<Matrix> w;
  w.embed_weight = Matrix(dh, shape.input_dim);
  w.embed_bias = Matrix(1, dh);
  w.attention.resize(shape.depth, {Matrix(dh, dh), Matrix(dh, dh), Matrix(dh, dh)});
  w.head_weight = Matrix(1, dh);
  w.head_bias = Matrix(1, 1);
  return w;
}

ModelParams init_params(std::uint64_t seed, const ModelShape& shape) {
  validate_shape(shape);
  Rng rng = make_rng(seed, streams::init);
  ModelParams p{shape, zeros_like(shape)};
  for_each_block(p.weights, [&](const std::string&, Matrix& block, bool is_bias) {
    if (!is_bias) block = glorot_uniform(rng, block.rows(), block.cols());
  });
  return p;
}

ModelParams init_params(std::uint64_t seed, std::size_t input_dim, std::size_t latent_dim,
                        std::size_t heads) {
  ModelShape shape;
  shape.input_dim = input_dim;
  shape.latent_dim = latent_dim;
  shape.heads = heads;
  return init_params(seed, shape);
}

Matrix embed(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.shape.input_dim) {
    throw Error(ErrorKind::shape, "embed: point has " + std::to_string(x.size()) +
                                      " features, model expects " +
                                      std::to_string(params.shape.input_dim));
  }
  return embed_points(params.weights, Matrix::row_vector(x));
}

Matrix attend(const ModelParams& params, const Matrix& latent_set) {
  if (latent_set.cols() != params.shape.latent_dim) {
    throw Error(ErrorKind::shape, "attend: latent set is " + latent_set.shape_string() +
                                      ", model width is " +
                                      std::to_string(params.shape.latent_dim));
  }
  Matrix z = latent_set;
  for (const auto& block : params.weights.attention) z = attend_block(block, z, params.shape.heads);
  return z;
}

std::vector<Matrix> attention_weights(const ModelParams& params, const Matrix& latent_set) {
  const auto& w = params.weights.attention.front();
  const Matrix q = matmul_transposed(latent_set, w.query);
  const Matrix k = matmul_transposed(latent_set, w.key);
  const std::size_t width = params.shape.head_width();
  std::vector<Matrix> out;
  for (std::size_t j = 0; j < params.shape.heads; ++j) {
    out.push_back(softmax_rows(scale(
        matmul_transposed(slice_cols(q, j * width, width), slice_cols(k, j * width, width)),
        1.0 / std::sqrt(static_cast<double>(width)))));
  }
  return out;
}

double score_set(const ModelParams& params, const Matrix& points) {
  if (points.rows() == 0) throw Error(ErrorKind::shape, "score_set: empty set");
  if (points.cols() != params.shape.input_dim) {
    throw Error(ErrorKind::shape, "score_set: set points have " + std::to_string(points.cols()) +
                                      " features, model expects " +
                                      std::to_string(params.shape.input_dim));
  }
  return forward_set(params.shape, params.weights, points)(0, 0);
}

WeightSet<numcore::Var> attach(numcore::Tape& tape, const WeightSet<Matrix>& weights) {
  WeightSet<numcore::Var> vars;
  vars.embed_weight = tape.parameter(weights.embed_weight);
  vars.embed_bias = tape.parameter(weights.embed_bias);
  for (const auto& block : weights.attention) {
    vars.attention.push_back(
        {tape.parameter(block.query), tape.parameter(block.key), tape.parameter(block.value)});
  }
  vars.head_weight = tape.parameter(weights.head_weight);
  vars.head_bias = tape.parameter(weights.head_bias);
  return vars;
}

WeightSet<Matrix> gradients(const numcore::Tape& tape, const WeightSet<numcore::Var>& vars) {
  WeightSet<Matrix> g;
  g.embed_weight = tape.grad(vars.embed_weight);
  g.embed_bias = tape.grad(vars.embed_bias);
  for (const auto& block : vars.attention) {
    g.attention.push_back({tape.grad(block.query), tape.grad(block.key), tape.grad(block.value)});
  }
  g.head_weight = tape.grad(vars.head_weight);
  g.head_bias = tape.grad(vars.head_bias);
  return g;
}

// --- persistence -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'E', 'T', 'A', 'D', 'M', 'D', 'L'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::parse, "model file truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  double f64() {
    auto s = take(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const ModelParams& params) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFormatVersion);
  const auto& s = params.shape;
  put_u32(out, static_cast<std::uint32_t>(s.input_dim));
  put_u32(out, static_cast<std::uint32_t>(s.latent_dim));
  put_u32(out, static_cast<std::uint32_t>(s.heads));
  put_u32(out, static_cast<std::uint32_t>(s.pooling));
  put_u32(out, static_cast<std::uint32_t>(s.depth));
  for_each_block(params.weights, [&](const std::string&, const Matrix& block, bool) {
    put_u32(out, static_cast<std::uint32_t>(block.rows()));
    put_u32(out, static_cast<std::uint32_t>(block.cols()));
    for (double v : block.data()) put_f64(out, v);
  });
  return out;
}

ModelParams deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::parse, "not a model file (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw Error(ErrorKind::parse, "unsupported model format version " + std::to_string(version));
  }
  ModelShape shape;
  shape.input_dim = in.u32();
  shape.latent_dim = in.u32();
  shape.heads = in.u32();
  const std::uint32_t pooling = in.u32();
  if (pooling > 1) throw Error(ErrorKind::parse, "unknown pooling mode in model file");
  shape.pooling = static_cast<Pooling>(pooling);
  shape.depth = in.u32();
  try {
    validate_shape(shape);
  } catch (const Error& e) {
    throw Error(ErrorKind::parse, std::string("model file: ") + e.what());
  }

  ModelParams p{shape, zeros_like(shape)};
  for_each_block(p.weights, [&](const std::string& name, Matrix& block, bool) {
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    if (rows != block.rows() || cols != block.cols()) {
      throw Error(ErrorKind::parse, "model file: block " + name + " has shape " +
                                        std::to_string(rows) + "x" + std::to_string(cols) +
                                        ", expected " + block.shape_string());
    }
    for (double& v : block.data()) v = in.f64();
  });
  if (!in.done()) throw Error(ErrorKind::parse, "model file has trailing bytes");
  return p;
}

void save_model(const std::string& path, const ModelParams& params) {
  const auto bytes = serialize(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "failed writing " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open model file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string model_hash(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize(params)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace setad::encoder
