#include "xsr/network.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <random>

#include "xsr/error.hpp"

namespace xsr {

std::size_t NetworkConfig::parameter_count() {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kernel_size() + static_cast<std::size_t>(l.cout);
  return n;
}

namespace {

std::size_t kernel_offset(int layer) {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l)
    off += NetworkConfig::layers[l].kernel_size() + static_cast<std::size_t>(NetworkConfig::layers[l].cout);
  return off;
}

}  // namespace

template <class T>
Weights<T>::Weights() : data_(NetworkConfig::parameter_count(), T(0)) {}

template <class T>
Weights<T> Weights<T>::he_normal(std::uint64_t seed) {
  Weights w;
  std::mt19937_64 rng(seed);
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / NetworkConfig::layers[l].fan_in()));
    for (T& v : w.kernel(l)) v = static_cast<T>(dist(rng));
  }
  return w;
}

template <class T>
Weights<T> Weights<T>::identity() {
  Weights w;
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    const auto& s = NetworkConfig::layers[l];
    const int c = s.k / 2;
    w.kernel(l)[static_cast<std::size_t>(c) * s.k + c] = T(1);  // [0][0][c][c]
  }
  return w;
}

template <class T>
std::span<T> Weights<T>::kernel(int layer) {
  return std::span<T>(data_).subspan(kernel_offset(layer), NetworkConfig::layers[layer].kernel_size());
}
template <class T>
std::span<const T> Weights<T>::kernel(int layer) const {
  return std::span<const T>(data_).subspan(kernel_offset(layer), NetworkConfig::layers[layer].kernel_size());
}
template <class T>
std::span<T> Weights<T>::bias(int layer) {
  return std::span<T>(data_).subspan(kernel_offset(layer) + NetworkConfig::layers[layer].kernel_size(),
                                     NetworkConfig::layers[layer].cout);
}
template <class T>
std::span<const T> Weights<T>::bias(int layer) const {
  return std::span<const T>(data_).subspan(kernel_offset(layer) + NetworkConfig::layers[layer].kernel_size(),
                                           NetworkConfig::layers[layer].cout);
}

template <class T>
bool Weights<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

template class Weights<float>;
template class Weights<double>;

// ------------------------------------------------------------ convolution

namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using StridedMap = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstStridedMap = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;

template <class T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, T(0)) {}
  T* plane(int ch) { return v.data() + static_cast<std::size_t>(ch) * h * w; }
  const T* plane(int ch) const { return v.data() + static_cast<std::size_t>(ch) * h * w; }
};

// Zero-padded C x Hp x Wp copy. Tap (dy, dx) of a same-padded convolution
// over the "wide" output grid h x Wp is then the contiguous window starting
// at dy*Wp + dx of every plane; columns x >= w of the wide grid are junk.
// A k-element tail keeps the last shifted window in bounds.
template <class T>
struct Padded {
  int c = 0, h = 0, w = 0, k = 1, hp = 0, wp = 0;
  std::vector<T> v;

  Padded() = default;
  Padded(int c_, int h_, int w_, int k_) : c(c_), h(h_), w(w_), k(k_), hp(h_ + k_ - 1), wp(w_ + k_ - 1) {
    v.assign(static_cast<std::size_t>(c) * plane() + k, T(0));
  }
  std::size_t plane() const { return static_cast<std::size_t>(hp) * wp; }
  Eigen::Index wide() const { return static_cast<Eigen::Index>(h) * wp; }
  std::ptrdiff_t tap(int dy, int dx) const { return static_cast<std::ptrdiff_t>(dy) * wp + dx; }
};

template <class T>
Padded<T> pad(const Tensor<T>& in, int k) {
  Padded<T> p(in.c, in.h, in.w, k);
  const int r = k / 2;
  for (int ch = 0; ch < in.c; ++ch)
    for (int y = 0; y < in.h; ++y)
      std::copy_n(in.plane(ch) + static_cast<std::size_t>(y) * in.w, in.w,
                  p.v.data() + ch * p.plane() + static_cast<std::size_t>(y + r) * p.wp + r);
  return p;
}

// Wide-grid columns per block; sized so one block of every tap window stays in L2.
constexpr Eigen::Index kColBlock = 4096;

// Column block of the single-channel im2col matrix (k*k rows).
template <class T>
void im2col_block(const Padded<T>& x, Eigen::Index n0, Eigen::Index nb, Mat<T>& col) {
  const int k = x.k;
  col.resize(k * k, nb);
  for (int t = 0; t < k * k; ++t) std::copy_n(x.v.data() + x.tap(t / k, t % k) + n0, nb, col.row(t).data());
}

template <class T>
Mat<T> tap_matrix(const LayerShape& s, const T* kern, int dy, int dx) {
  Mat<T> m(s.cout, s.cin);
  for (int co = 0; co < s.cout; ++co)
    for (int ci = 0; ci < s.cin; ++ci) m(co, ci) = kern[((static_cast<std::size_t>(co) * s.cin + ci) * s.k + dy) * s.k + dx];
  return m;
}

template <class T>
std::vector<Mat<T>> tap_matrices(const LayerShape& s, const T* kern) {
  std::vector<Mat<T>> taps;
  taps.reserve(static_cast<std::size_t>(s.k) * s.k);
  for (int dy = 0; dy < s.k; ++dy)
    for (int dx = 0; dx < s.k; ++dx) taps.push_back(tap_matrix(s, kern, dy, dx));
  return taps;
}

template <class T>
Tensor<T> conv_forward(const LayerShape& s, const T* kern, const T* bias, const Padded<T>& x) {
  const Eigen::Index n = x.wide();
  Mat<T> wide(s.cout, n);
  if (s.cin == 1) {
    Eigen::Map<const Mat<T>> kmat(kern, s.cout, s.k * s.k);
    Mat<T> col;
    for (Eigen::Index n0 = 0; n0 < n; n0 += kColBlock) {
      const Eigen::Index nb = std::min(kColBlock, n - n0);
      im2col_block(x, n0, nb, col);
      wide.middleCols(n0, nb).noalias() = kmat * col;
    }
  } else {
    const auto taps = tap_matrices(s, kern);
    Mat<T> acc;
    for (Eigen::Index n0 = 0; n0 < n; n0 += kColBlock) {
      const Eigen::Index nb = std::min(kColBlock, n - n0);
      acc.setZero(s.cout, nb);
      for (int t = 0; t < s.k * s.k; ++t) {
        ConstStridedMap<T> xs(x.v.data() + x.tap(t / s.k, t % s.k) + n0, s.cin, nb, Eigen::OuterStride<>(x.plane()));
        acc.noalias() += taps[t] * xs;
      }
      wide.middleCols(n0, nb) = acc;
    }
  }
  Tensor<T> out(s.cout, x.h, x.w);
  for (int co = 0; co < s.cout; ++co) {
    T* dst = out.plane(co);
    const T b = bias[co];
    for (int y = 0; y < x.h; ++y)
      for (int xx = 0; xx < x.w; ++xx) {
        const T v = wide(co, static_cast<Eigen::Index>(y) * x.wp + xx) + b;
        dst[static_cast<std::size_t>(y) * x.w + xx] = s.relu && v < T(0) ? T(0) : v;
      }
  }
  return out;
}

// `dout` is the cotangent of the layer output after the activation mask has
// been applied. Accumulates into gkern/gbias; fills `din` when non-null.
template <class T>
void conv_backward(const LayerShape& s, const T* kern, const Padded<T>& x, const Tensor<T>& dout, T* gkern, T* gbias,
                   Tensor<T>* din) {
  const Eigen::Index n = x.wide();
  Mat<T> dw = Mat<T>::Zero(s.cout, n);
  for (int co = 0; co < s.cout; ++co) {
    const T* src = dout.plane(co);
    T acc = 0;
    for (int y = 0; y < x.h; ++y)
      for (int xx = 0; xx < x.w; ++xx) {
        const T g = src[static_cast<std::size_t>(y) * x.w + xx];
        dw(co, static_cast<Eigen::Index>(y) * x.wp + xx) = g;
        acc += g;
      }
    gbias[co] += acc;
  }

  Padded<T> dpad;
  if (din) dpad = Padded<T>(s.cin, x.h, x.w, s.k);

  if (s.cin == 1) {
    Eigen::Map<Mat<T>> gk(gkern, s.cout, s.k * s.k);
    Eigen::Map<const Mat<T>> kmat(kern, s.cout, s.k * s.k);
    Mat<T> col, dcol;
    for (Eigen::Index n0 = 0; n0 < n; n0 += kColBlock) {
      const Eigen::Index nb = std::min(kColBlock, n - n0);
      im2col_block(x, n0, nb, col);
      gk.noalias() += dw.middleCols(n0, nb) * col.transpose();
      if (din) {
        dcol.noalias() = kmat.transpose() * dw.middleCols(n0, nb);
        for (int t = 0; t < s.k * s.k; ++t) {
          T* dst = dpad.v.data() + dpad.tap(t / s.k, t % s.k) + n0;
          for (Eigen::Index j = 0; j < nb; ++j) dst[j] += dcol(t, j);
        }
      }
    }
  } else {
    const auto taps = din ? tap_matrices(s, kern) : std::vector<Mat<T>>{};
    std::vector<Mat<T>> gtaps(static_cast<std::size_t>(s.k) * s.k, Mat<T>::Zero(s.cout, s.cin));
    for (Eigen::Index n0 = 0; n0 < n; n0 += kColBlock) {
      const Eigen::Index nb = std::min(kColBlock, n - n0);
      const auto dwb = dw.middleCols(n0, nb);
      for (int t = 0; t < s.k * s.k; ++t) {
        const std::ptrdiff_t off = x.tap(t / s.k, t % s.k) + n0;
        ConstStridedMap<T> xs(x.v.data() + off, s.cin, nb, Eigen::OuterStride<>(x.plane()));
        gtaps[t].noalias() += dwb * xs.transpose();
        if (din) {
          StridedMap<T> ds(dpad.v.data() + off, s.cin, nb, Eigen::OuterStride<>(dpad.plane()));
          ds.noalias() += taps[t].transpose() * dwb;
        }
      }
    }
    for (int t = 0; t < s.k * s.k; ++t) {
      const int dy = t / s.k, dx = t % s.k;
      for (int co = 0; co < s.cout; ++co)
        for (int ci = 0; ci < s.cin; ++ci)
          gkern[((static_cast<std::size_t>(co) * s.cin + ci) * s.k + dy) * s.k + dx] += gtaps[t](co, ci);
    }
  }

  if (din) {
    *din = Tensor<T>(s.cin, x.h, x.w);
    const int r = s.k / 2;
    for (int ch = 0; ch < s.cin; ++ch)
      for (int y = 0; y < x.h; ++y)
        std::copy_n(dpad.v.data() + ch * dpad.plane() + static_cast<std::size_t>(y + r) * dpad.wp + r, x.w,
                    din->plane(ch) + static_cast<std::size_t>(y) * x.w);
  }
}

template <class T>
Tensor<T> to_tensor(const Image& img) {
  Tensor<T> t(1, img.h(), img.w());
  for (std::size_t i = 0; i < img.size(); ++i) t.v[i] = static_cast<T>(img[i]);
  return t;
}

template <class T>
Image to_image(const Tensor<T>& t) {
  Image img(t.h, t.w);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(t.v[i]);
  return img;
}

template <class T>
struct Trace {
  std::array<Padded<T>, NetworkConfig::kDepth> inputs;
  std::array<Tensor<T>, NetworkConfig::kDepth> outputs;
};

template <class T>
void forward_traced(const Weights<T>& w, const Image& input, Trace<T>& tr) {
  Tensor<T> act = to_tensor<T>(input);
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    const auto& s = NetworkConfig::layers[l];
    tr.inputs[l] = pad(act, s.k);
    tr.outputs[l] = conv_forward(s, w.kernel(l).data(), w.bias(l).data(), tr.inputs[l]);
    act = tr.outputs[l];
  }
}

template <class T>
Weights<T> sample_gradient(const Weights<T>& w, const Sample& smp, const LossWeights& loss, LossReport& rep) {
  require(smp.input && smp.target, "backward: null sample");
  require_same_shape(*smp.input, *smp.target, "backward");
  Trace<T> tr;
  forward_traced(w, *smp.input, tr);
  constexpr int last = NetworkConfig::kDepth - 1;
  const Image sr = to_image(tr.outputs[last]);
  const Image cot = total_loss_grad(sr, *smp.target, loss, &rep);

  Weights<T> g;
  Tensor<T> d = to_tensor<T>(cot);
  for (int l = last; l >= 0; --l) {
    const auto& s = NetworkConfig::layers[l];
    if (s.relu) {
      const auto& out = tr.outputs[l].v;
      for (std::size_t i = 0; i < d.v.size(); ++i)
        if (!(out[i] > T(0))) d.v[i] = T(0);
    }
    Tensor<T> din;
    conv_backward(s, w.kernel(l).data(), tr.inputs[l], d, g.kernel(l).data(), g.bias(l).data(), l > 0 ? &din : nullptr);
    d = std::move(din);
  }
  return g;
}

}  // namespace

template <class T>
Image forward(const Weights<T>& w, const Image& input) {
  require(!input.empty(), "forward: empty input");
  Tensor<T> act = to_tensor<T>(input);
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    const auto& s = NetworkConfig::layers[l];
    act = conv_forward(s, w.kernel(l).data(), w.bias(l).data(), pad(act, s.k));
  }
  return to_image(act);
}

template <class T>
Gradients<T> backward(const Weights<T>& w, std::span<const Sample> batch, const LossWeights& loss, bool parallel) {
  require(!batch.empty(), "backward: empty batch");
  loss.validate();
  const int n = static_cast<int>(batch.size());
  std::vector<Weights<T>> per(batch.size(), Weights<T>::zeros());
  std::vector<LossReport> reps(batch.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(static, 1) if (parallel && n > 1)
  for (int b = 0; b < n; ++b) {
    try {
      per[b] = sample_gradient(w, batch[b], loss, reps[b]);
    } catch (...) {
#pragma omp critical(xsr_backward_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  Gradients<T> out;
  auto dst = out.grads.params();
  for (int b = 0; b < n; ++b) {
    const auto src = per[b].params();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    out.report.rec += reps[b].rec;
    out.report.fd += reps[b].fd;
    out.report.total += reps[b].total;
  }
  const T inv = T(1) / T(n);
  for (T& v : dst) v *= inv;
  out.report.rec /= n;
  out.report.fd /= n;
  out.report.total /= n;
  return out;
}

template <class T>
void adam_step(Weights<T>& w, const Weights<T>& grads, AdamState<T>& st, const AdamParams& p) {
  require(p.lr > 0, "adam_step: learning rate must be positive");
  const auto g = grads.params();
  auto x = w.params();
  for (T v : g)
    if (!std::isfinite(v)) throw NumericError("adam_step: non-finite gradient");
  if (st.m.empty()) {
    st.m.assign(x.size(), 0.0);
    st.v.assign(x.size(), 0.0);
  }
  require(st.m.size() == x.size(), "adam_step: optimiser state does not match weights");
  ++st.step;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    st.m[i] = p.beta1 * st.m[i] + (1.0 - p.beta1) * gi;
    st.v[i] = p.beta2 * st.v[i] + (1.0 - p.beta2) * gi * gi;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    x[i] = static_cast<T>(static_cast<double>(x[i]) - p.lr * mhat / (std::sqrt(vhat) + p.eps));
  }
  if (!w.all_finite()) throw NumericError("adam_step: weights became non-finite");
}

template Image forward<float>(const Weights<float>&, const Image&);
template Image forward<double>(const Weights<double>&, const Image&);
template Gradients<float> backward<float>(const Weights<float>&, std::span<const Sample>, const LossWeights&, bool);
template Gradients<double> backward<double>(const Weights<double>&, std::span<const Sample>, const LossWeights&, bool);
template void adam_step<float>(Weights<float>&, const Weights<float>&, AdamState<float>&, const AdamParams&);
template void adam_step<double>(Weights<double>&, const Weights<double>&, AdamState<double>&, const AdamParams&);

// ------------------------------------------------------------ checkpoint

namespace {

constexpr char kMagic[] = "XSRW1";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

}  // namespace

void save_checkpoint(const Weights<float>& w, const std::filesystem::path& path) {
  std::string out(kMagic, 5);
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    const auto& s = NetworkConfig::layers[l];
    put_u32(out, static_cast<std::uint32_t>(s.cout));
    put_u32(out, static_cast<std::uint32_t>(s.cin));
    put_u32(out, static_cast<std::uint32_t>(s.k));
    put_u32(out, static_cast<std::uint32_t>(s.k));
    for (float v : w.kernel(l)) put_f32(out, v);
    put_u32(out, static_cast<std::uint32_t>(s.cout));
    for (float v : w.bias(l)) put_f32(out, v);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("write failed: " + path.string());
}

Weights<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto u32 = [&]() {
    if (pos + 4 > bytes.size()) throw DataError("checkpoint truncated: " + path.string());
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  };
  if (bytes.compare(0, 5, kMagic) != 0) throw DataError("not an XSRW1 checkpoint: " + path.string());
  pos = 5;
  Weights<float> w;
  for (int l = 0; l < NetworkConfig::kDepth; ++l) {
    const auto& s = NetworkConfig::layers[l];
    const std::uint32_t dims[4] = {u32(), u32(), u32(), u32()};
    if (dims[0] != std::uint32_t(s.cout) || dims[1] != std::uint32_t(s.cin) || dims[2] != std::uint32_t(s.k) ||
        dims[3] != std::uint32_t(s.k))
      throw DataError("checkpoint layer shape does not match the network");
    for (float& v : w.kernel(l)) v = std::bit_cast<float>(u32());
    if (u32() != std::uint32_t(s.cout)) throw DataError("checkpoint bias length does not match the network");
    for (float& v : w.bias(l)) v = std::bit_cast<float>(u32());
  }
  if (pos != bytes.size()) throw DataError("checkpoint has trailing bytes: " + path.string());
  if (!w.all_finite()) throw DataError("checkpoint contains non-finite weights");
  return w;
}

}  // namespace xsr
