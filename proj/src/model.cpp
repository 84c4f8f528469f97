#include "avgflow/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "avgflow/rng.hpp"

namespace avgflow {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Offsets into the flat parameter vector. Order: input projection, time
// projection, per-layer (gate, message, update), output projection.
struct ParamLayout {
  int h, din, de, t, layers;
  std::int64_t w_in, b_in, w_time;
  std::int64_t layer_base, layer_stride;
  std::int64_t w_gate, b_gate, w_msg, b_msg, w_upd, b_upd;  // within a layer
  std::int64_t w_out, b_out, total;

  explicit ParamLayout(const ModelConfig& cfg)
      : h(cfg.hidden_width),
        din(cfg.input_width()),
        de(cfg.edge_feature_width()),
        t(cfg.time_embed_width),
        layers(cfg.n_layers) {
    std::int64_t off = 0;
    w_in = off; off += static_cast<std::int64_t>(h) * din;
    b_in = off; off += h;
    w_time = off; off += static_cast<std::int64_t>(h) * t;
    w_gate = 0;
    b_gate = w_gate + static_cast<std::int64_t>(h) * de;
    w_msg = b_gate + h;
    b_msg = w_msg + static_cast<std::int64_t>(h) * h;
    w_upd = b_msg + h;
    b_upd = w_upd + static_cast<std::int64_t>(h) * 2 * h;
    layer_stride = b_upd + h;
    layer_base = off;
    off += layer_stride * layers;
    w_out = off; off += 3 * static_cast<std::int64_t>(h);
    b_out = off; off += 3;
    total = off;
  }
};

struct LayerView {
  Map<const MatrixXd> w_gate, w_msg, w_upd;
  Map<const VectorXd> b_gate, b_msg, b_upd;
};

struct NetView {
  ParamLayout lay;
  Map<const MatrixXd> w_in, w_time, w_out;
  Map<const VectorXd> b_in, b_out;
  const double* base;

  explicit NetView(const VectorFieldNet& net)
      : lay(net.config),
        w_in(net.params.data() + lay.w_in, lay.h, lay.din),
        w_time(net.params.data() + lay.w_time, lay.h, lay.t),
        w_out(net.params.data() + lay.w_out, 3, lay.h),
        b_in(net.params.data() + lay.b_in, lay.h),
        b_out(net.params.data() + lay.b_out, 3),
        base(net.params.data()) {}

  LayerView layer(int l) const {
    const double* p = base + lay.layer_base + l * lay.layer_stride;
    return LayerView{Map<const MatrixXd>(p + lay.w_gate, lay.h, lay.de),
                     Map<const MatrixXd>(p + lay.w_msg, lay.h, lay.h),
                     Map<const MatrixXd>(p + lay.w_upd, lay.h, 2 * lay.h),
                     Map<const VectorXd>(p + lay.b_gate, lay.h),
                     Map<const VectorXd>(p + lay.b_msg, lay.h),
                     Map<const VectorXd>(p + lay.b_upd, lay.h)};
  }
};

VectorXd time_embedding(double t, int width) {
  VectorXd e(width);
  for (int k = 0; k < width / 2; ++k) {
    const double w = M_PI * std::pow(2.0, k);
    e(2 * k) = std::sin(w * t);
    e(2 * k + 1) = std::cos(w * t);
  }
  return e;
}

MatrixXd pair_features(const MoleculeGraph& graph, const Coords& x) {
  const int n = graph.n_atoms;
  std::vector<int> bond(static_cast<std::size_t>(n) * n, 0);
  for (const Edge& e : graph.edges) {
    bond[e.i * n + e.j] = static_cast<int>(e.type);
    bond[e.j * n + e.i] = static_cast<int>(e.type);
  }
  const double spacing = kRbfMax / (kRbfCount - 1);
  MatrixXd ep = MatrixXd::Zero(static_cast<std::int64_t>(n) * n,
                               kBondTypeCount + kRbfCount);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto row = static_cast<std::int64_t>(i) * n + j;
      ep(row, bond[i * n + j]) = 1.0;
      const double d = (x.row(i) - x.row(j)).norm();
      for (int k = 0; k < kRbfCount; ++k) {
        const double u = (d - k * spacing) / spacing;
        ep(row, kBondTypeCount + k) = std::exp(-0.5 * u * u);
      }
    }
  }
  return ep;
}

void check_finite(const MatrixXd& m, int layer) {
  if (!m.allFinite()) {
    std::ostringstream msg;
    msg << "forward: non-finite activations at layer " << layer;
    throw std::runtime_error(msg.str());
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden_width <= 0 || n_layers <= 0 || time_embed_width <= 0 || pe_width <= 0)
    throw std::invalid_argument("model config: all sizes must be positive");
  if (time_embed_width % 2 != 0)
    throw std::invalid_argument("model config: time_embed_width must be even");
}

std::int64_t param_count(const ModelConfig& cfg) {
  cfg.validate();
  return ParamLayout(cfg).total;
}

VectorFieldNet init_net(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const ParamLayout lay(cfg);
  VectorFieldNet net{cfg, VectorXd::Zero(lay.total)};
  Rng rng(seed, "model_init");

  auto fill = [&](std::int64_t off, std::int64_t rows, std::int64_t cols) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::int64_t i = 0; i < rows * cols; ++i)
      net.params(off + i) = scale * rng.normal();
  };
  fill(lay.w_in, lay.h, lay.din);
  fill(lay.w_time, lay.h, lay.t);
  for (int l = 0; l < lay.layers; ++l) {
    const std::int64_t p = lay.layer_base + l * lay.layer_stride;
    fill(p + lay.w_gate, lay.h, lay.de);
    fill(p + lay.w_msg, lay.h, lay.h);
    fill(p + lay.w_upd, lay.h, 2 * lay.h);
  }
  // Biases and the output projection stay zero.
  return net;
}

Eigen::MatrixXd featurize(const MoleculeGraph& graph) {
  validate_graph(graph);
  const int pe = static_cast<int>(graph.laplacian_pe.cols());
  MatrixXd f = MatrixXd::Zero(graph.n_atoms, kAtomTypeVocab + 1 + pe);
  for (int i = 0; i < graph.n_atoms; ++i) {
    const int a = graph.atom_type[i];
    if (a < 0 || a >= kAtomTypeVocab)
      throw std::invalid_argument("featurize: atom type outside vocabulary");
    f(i, a) = 1.0;
    f(i, kAtomTypeVocab) = graph.degree[i] / 6.0;
    f.block(i, kAtomTypeVocab + 1, 1, pe) = graph.laplacian_pe.row(i);
  }
  return f;
}

Coords forward_cached(const VectorFieldNet& net, const MoleculeGraph& graph,
                      const Coords& x, double t, ForwardCache& cache) {
  net.config.validate();
  if (static_cast<std::int64_t>(net.params.size()) != param_count(net.config))
    throw std::invalid_argument("forward: parameter vector size mismatch");
  if (x.rows() != graph.n_atoms)
    throw std::invalid_argument("forward: coordinate/graph size mismatch");
  if (graph.laplacian_pe.cols() != net.config.pe_width)
    throw std::invalid_argument("forward: graph PE width does not match config");

  const NetView v(net);
  const int n = graph.n_atoms;
  const int h = v.lay.h;
  const double norm = 1.0 / std::max(n - 1, 1);

  const MatrixXd feat = featurize(graph);
  cache.z.resize(n, v.lay.din);
  cache.z << feat, x;
  cache.temb = time_embedding(t, v.lay.t);
  cache.epair = pair_features(graph, x);

  cache.h.assign(1, MatrixXd());
  cache.g.clear();
  cache.s.clear();
  cache.m.clear();
  cache.u.clear();

  MatrixXd a0 = cache.z * v.w_in.transpose();
  a0.rowwise() += (v.b_in + v.w_time * cache.temb).transpose();
  cache.h[0] = a0.array().tanh();
  check_finite(cache.h[0], 0);

  for (int l = 0; l < v.lay.layers; ++l) {
    const LayerView lv = v.layer(l);

    MatrixXd gate;
    if (net.config.use_pair_bias) {
      gate = cache.epair * lv.w_gate.transpose();
      gate.rowwise() += lv.b_gate.transpose();
      gate = gate.array().tanh();
    } else {
      gate = MatrixXd::Ones(static_cast<std::int64_t>(n) * n, h);
    }
    for (int i = 0; i < n; ++i) gate.row(static_cast<std::int64_t>(i) * n + i).setZero();

    MatrixXd s = cache.h[l] * lv.w_msg.transpose();
    s.rowwise() += lv.b_msg.transpose();

    MatrixXd m = MatrixXd::Zero(n, h);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        m.row(i) += gate.row(static_cast<std::int64_t>(i) * n + j).cwiseProduct(s.row(j));
      }
    m *= norm;

    MatrixXd cat(n, 2 * h);
    cat << cache.h[l], m;
    MatrixXd c = cat * lv.w_upd.transpose();
    c.rowwise() += lv.b_upd.transpose();
    MatrixXd u = c.array().tanh();

    cache.g.push_back(std::move(gate));
    cache.s.push_back(std::move(s));
    cache.m.push_back(std::move(m));
    cache.u.push_back(std::move(u));
    cache.h.push_back(cache.h[l] + cache.u[l]);
    check_finite(cache.h[l + 1], l + 1);
  }

  Coords out = cache.h.back() * v.w_out.transpose();
  out.rowwise() += v.b_out.transpose();
  check_finite(out, v.lay.layers + 1);
  return out;
}

Coords forward(const VectorFieldNet& net, const MoleculeGraph& graph,
               const Coords& x, double t) {
  ForwardCache cache;
  return forward_cached(net, graph, x, t, cache);
}

Eigen::VectorXd backward(const VectorFieldNet& net, const ForwardCache& cache,
                         const Coords& cotangent) {
  const NetView v(net);
  const int n = static_cast<int>(cache.z.rows());
  const int h = v.lay.h;
  const double norm = 1.0 / std::max(n - 1, 1);

  VectorXd grad = VectorXd::Zero(v.lay.total);
  Map<MatrixXd> d_w_out(grad.data() + v.lay.w_out, 3, h);
  Map<VectorXd> d_b_out(grad.data() + v.lay.b_out, 3);

  d_w_out = cotangent.transpose() * cache.h.back();
  d_b_out = cotangent.colwise().sum();
  MatrixXd dh = cotangent * v.w_out;

  for (int l = v.lay.layers - 1; l >= 0; --l) {
    const LayerView lv = v.layer(l);
    double* p = grad.data() + v.lay.layer_base + l * v.lay.layer_stride;
    Map<MatrixXd> d_w_gate(p + v.lay.w_gate, h, v.lay.de);
    Map<VectorXd> d_b_gate(p + v.lay.b_gate, h);
    Map<MatrixXd> d_w_msg(p + v.lay.w_msg, h, h);
    Map<VectorXd> d_b_msg(p + v.lay.b_msg, h);
    Map<MatrixXd> d_w_upd(p + v.lay.w_upd, h, 2 * h);
    Map<VectorXd> d_b_upd(p + v.lay.b_upd, h);

    const MatrixXd dc =
        dh.cwiseProduct(MatrixXd::Ones(n, h) - cache.u[l].cwiseProduct(cache.u[l]));
    MatrixXd cat(n, 2 * h);
    cat << cache.h[l], cache.m[l];
    d_w_upd = dc.transpose() * cat;
    d_b_upd = dc.colwise().sum();

    const MatrixXd dcat = dc * lv.w_upd;
    const MatrixXd dh_dir = dcat.leftCols(h);
    const MatrixXd dm = dcat.rightCols(h);

    MatrixXd ds = MatrixXd::Zero(n, h);
    MatrixXd dgate;
    if (net.config.use_pair_bias)
      dgate = MatrixXd::Zero(static_cast<std::int64_t>(n) * n, h);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const auto row = static_cast<std::int64_t>(i) * n + j;
        ds.row(j) += norm * cache.g[l].row(row).cwiseProduct(dm.row(i));
        if (net.config.use_pair_bias)
          dgate.row(row) = norm * dm.row(i).cwiseProduct(cache.s[l].row(j));
      }

    if (net.config.use_pair_bias) {
      // tanh backward; diagonal rows carry zero gate and zero dgate.
      const MatrixXd dp = dgate.cwiseProduct(
          MatrixXd::Ones(dgate.rows(), h) - cache.g[l].cwiseProduct(cache.g[l]));
      d_w_gate = dp.transpose() * cache.epair;
      d_b_gate = dp.colwise().sum();
    }

    d_w_msg = ds.transpose() * cache.h[l];
    d_b_msg = ds.colwise().sum();

    dh = dh + dh_dir + ds * lv.w_msg;
  }

  const MatrixXd da0 =
      dh.cwiseProduct(MatrixXd::Ones(n, h) - cache.h[0].cwiseProduct(cache.h[0]));
  Map<MatrixXd> d_w_in(grad.data() + v.lay.w_in, h, v.lay.din);
  Map<VectorXd> d_b_in(grad.data() + v.lay.b_in, h);
  Map<MatrixXd> d_w_time(grad.data() + v.lay.w_time, h, v.lay.t);
  d_w_in = da0.transpose() * cache.z;
  d_b_in = da0.colwise().sum();
  d_w_time = da0.colwise().sum().transpose() * cache.temb.transpose();

  return grad;
}

// ---- checkpoint I/O ----

namespace {

constexpr char kMagic[8] = {'A', 'V', 'G', 'F', 'L', 'W', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& off) {
  if (off + sizeof(T) > buf.size())
    throw std::runtime_error("checkpoint: truncated file");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const VectorFieldNet& net, const std::string& path,
                     const Eigen::VectorXd* ema) {
  if (static_cast<std::int64_t>(net.params.size()) != param_count(net.config))
    throw std::invalid_argument("save_checkpoint: parameter size mismatch");
  if (ema && ema->size() != net.params.size())
    throw std::invalid_argument("save_checkpoint: EMA size mismatch");

  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put(buf, kVersion);
  put(buf, static_cast<std::int32_t>(net.config.hidden_width));
  put(buf, static_cast<std::int32_t>(net.config.n_layers));
  put(buf, static_cast<std::int32_t>(net.config.time_embed_width));
  put(buf, static_cast<std::int32_t>(net.config.pe_width));
  put(buf, static_cast<std::uint8_t>(net.config.use_pair_bias ? 1 : 0));
  put(buf, static_cast<std::uint8_t>(ema ? 1 : 0));
  put(buf, static_cast<std::uint64_t>(net.params.size()));
  buf.append(reinterpret_cast<const char*>(net.params.data()),
             sizeof(double) * net.params.size());
  if (ema)
    buf.append(reinterpret_cast<const char*>(ema->data()),
               sizeof(double) * ema->size());
  put(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw std::runtime_error("checkpoint: truncated file");
  const std::uint64_t stored_sum =
      *reinterpret_cast<const std::uint64_t*>(buf.data() + buf.size() - 8);
  if (fnv1a64(buf.data(), buf.size() - 8) != stored_sum)
    throw std::runtime_error("checkpoint: checksum mismatch (corrupt or truncated)");

  std::size_t off = 0;
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  off += sizeof(kMagic);
  if (take<std::uint32_t>(buf, off) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version");

  Checkpoint ck;
  ck.net.config.hidden_width = take<std::int32_t>(buf, off);
  ck.net.config.n_layers = take<std::int32_t>(buf, off);
  ck.net.config.time_embed_width = take<std::int32_t>(buf, off);
  ck.net.config.pe_width = take<std::int32_t>(buf, off);
  ck.net.config.use_pair_bias = take<std::uint8_t>(buf, off) != 0;
  ck.has_ema = take<std::uint8_t>(buf, off) != 0;
  const auto count = take<std::uint64_t>(buf, off);
  ck.net.config.validate();
  if (count != static_cast<std::uint64_t>(param_count(ck.net.config)))
    throw std::runtime_error("checkpoint: parameter count does not match config");

  const std::size_t payload = sizeof(double) * count * (ck.has_ema ? 2 : 1);
  if (off + payload + 8 != buf.size())
    throw std::runtime_error("checkpoint: payload size mismatch");
  ck.net.params.resize(static_cast<Eigen::Index>(count));
  std::memcpy(ck.net.params.data(), buf.data() + off, sizeof(double) * count);
  off += sizeof(double) * count;
  if (ck.has_ema) {
    ck.ema.resize(static_cast<Eigen::Index>(count));
    std::memcpy(ck.ema.data(), buf.data() + off, sizeof(double) * count);
  }
  return ck;
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  const ModelConfig& c = ck.net.config;
  if (c.hidden_width != expected.hidden_width || c.n_layers != expected.n_layers ||
      c.time_embed_width != expected.time_embed_width ||
      c.pe_width != expected.pe_width || c.use_pair_bias != expected.use_pair_bias) {
    std::ostringstream msg;
    msg << "checkpoint: config mismatch (stored hidden=" << c.hidden_width
        << " layers=" << c.n_layers << ", expected hidden=" << expected.hidden_width
        << " layers=" << expected.n_layers << ")";
    throw std::runtime_error(msg.str());
  }
  return ck;
}

}  // namespace avgflow
