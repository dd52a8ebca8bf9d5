#include "branchtrace/mlp.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace branchtrace {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::gaussian: return "gaussian";
  }
  return "?";
}

std::string_view to_string(BoundaryMask m) {
  switch (m) {
    case BoundaryMask::none: return "none";
    case BoundaryMask::sin_pi_x: return "sin_pi_x";
    case BoundaryMask::sin_pi_x_sin_pi_y: return "sin_pi_x_sin_pi_y";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "gaussian") return Activation::gaussian;
  throw Error("unknown activation '" + std::string(s) + "'");
}

BoundaryMask parse_mask(std::string_view s) {
  if (s == "none") return BoundaryMask::none;
  if (s == "sin_pi_x") return BoundaryMask::sin_pi_x;
  if (s == "sin_pi_x_sin_pi_y") return BoundaryMask::sin_pi_x_sin_pi_y;
  throw Error("unknown mask '" + std::string(s) + "'");
}

ActivationValue activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh: {
      const double t = std::tanh(z);
      const double s1 = 1.0 - t * t;
      return {t, s1, -2.0 * t * s1, s1 * (6.0 * t * t - 2.0)};
    }
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      const double s1 = s * (1.0 - s);
      const double s2 = s1 * (1.0 - 2.0 * s);
      return {s, s1, s2, s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1};
    }
    case Activation::gaussian: {
      const double g = std::exp(-z * z);
      return {g, -2.0 * z * g, (4.0 * z * z - 2.0) * g, (12.0 * z - 8.0 * z * z * z) * g};
    }
  }
  return {};
}

std::size_t weight_count(int p, int l, int q) {
  if (p < 1 || l < 1 || q < 1) throw Error("weight_count: p, l, q must be positive");
  const auto P = static_cast<std::size_t>(p), L = static_cast<std::size_t>(l), Q = static_cast<std::size_t>(q);
  return (P + 1) * Q + (L - 1) * (Q + 1) * Q + (Q + 1);
}

namespace {

// sin(πx) and cos(πx), reflected about x = 1/2 so that x = 1 gives an exact 0.
double sin_pi(double x) { return x > 0.5 ? std::sin(std::numbers::pi * (1.0 - x)) : std::sin(std::numbers::pi * x); }
double cos_pi(double x) { return x > 0.5 ? -std::cos(std::numbers::pi * (1.0 - x)) : std::cos(std::numbers::pi * x); }

// A jet in channel form: [value, d_1..d_p, dd_1..dd_p].
constexpr int kMaxC = 5;
using Chan = std::array<double, kMaxC>;
using Mat = std::array<double, kMaxC * kMaxC>;  // row r, column c at r*kMaxC + c

Jet to_jet(const Chan& c, int p) {
  Jet j;
  j.value = c[0];
  for (int i = 0; i < p; ++i) {
    j.grad[i] = c[1 + i];
    j.second[i] = c[1 + p + i];
  }
  return j;
}

// d(masked jet)/d(raw jet).
Mat mask_matrix(BoundaryMask mask, const Point& x, int p) {
  Mat g{};
  const int C = 1 + 2 * p;
  if (mask == BoundaryMask::none) {
    for (int r = 0; r < C; ++r) g[r * kMaxC + r] = 1.0;
    return g;
  }
  const Jet m = mask_jet(mask, x);
  for (int r = 0; r < C; ++r) g[r * kMaxC + r] = m.value;
  for (int i = 0; i < p; ++i) {
    g[(1 + i) * kMaxC] = m.grad[i];
    g[(1 + p + i) * kMaxC] = m.second[i];
    g[(1 + p + i) * kMaxC + 1 + i] = 2.0 * m.grad[i];
  }
  return g;
}

Chan mat_vec(const Mat& m, const Chan& v, int C) {
  Chan out{};
  for (int r = 0; r < C; ++r) {
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += m[r * kMaxC + c] * v[c];
    out[r] = s;
  }
  return out;
}

struct Layout {
  std::vector<std::size_t> w;  // offset of W_k
  std::vector<std::size_t> b;  // offset of b_k
  std::size_t out_w = 0;
  std::size_t out_b = 0;
};

Layout layout(int p, int l, int q) {
  Layout lo;
  std::size_t off = 0;
  for (int k = 0; k < l; ++k) {
    lo.w.push_back(off);
    off += static_cast<std::size_t>((k == 0 ? p : q) * q);
    lo.b.push_back(off);
    off += static_cast<std::size_t>(q);
  }
  lo.out_w = off;
  lo.out_b = off + static_cast<std::size_t>(q);
  return lo;
}

struct Trace {
  std::vector<Chan> z;  // pre-activation jets, layer-major
  std::vector<Chan> a;  // post-activation jets
  std::vector<ActivationValue> s;
  Chan raw{};
};

Trace run_forward(const Mlp& net, const Layout& lo, const Point& x) {
  const int p = net.inputs(), l = net.hidden_layers(), q = net.width();
  const int C = 1 + 2 * p;
  const auto w = net.weights();
  Trace t;
  t.z.resize(static_cast<std::size_t>(l * q));
  t.a.resize(t.z.size());
  t.s.resize(t.z.size());
  for (int k = 0; k < l; ++k) {
    for (int j = 0; j < q; ++j) {
      Chan z{};
      z[0] = w[lo.b[k] + j];
      if (k == 0) {
        for (int i = 0; i < p; ++i) {
          const double wij = w[lo.w[0] + i * q + j];
          z[0] += x[i] * wij;
          z[1 + i] = wij;
        }
      } else {
        for (int i = 0; i < q; ++i) {
          const double wij = w[lo.w[k] + i * q + j];
          const Chan& ai = t.a[(k - 1) * q + i];
          for (int c = 0; c < C; ++c) z[c] += wij * ai[c];
        }
      }
      const ActivationValue s = activate(net.activation(), z[0]);
      Chan a{};
      a[0] = s.s0;
      for (int m = 0; m < p; ++m) {
        a[1 + m] = s.s1 * z[1 + m];
        a[1 + p + m] = s.s2 * z[1 + m] * z[1 + m] + s.s1 * z[1 + p + m];
      }
      const auto idx = static_cast<std::size_t>(k * q + j);
      t.z[idx] = z;
      t.a[idx] = a;
      t.s[idx] = s;
    }
  }
  t.raw[0] = w[lo.out_b];
  for (int j = 0; j < q; ++j) {
    const Chan& aj = t.a[(l - 1) * q + j];
    for (int c = 0; c < C; ++c) t.raw[c] += w[lo.out_w + j] * aj[c];
  }
  return t;
}

}  // namespace

Jet mask_jet(BoundaryMask m, const Point& x) {
  constexpr double pi = std::numbers::pi;
  Jet j;
  switch (m) {
    case BoundaryMask::none:
      j.value = 1.0;
      break;
    case BoundaryMask::sin_pi_x: {
      const double s = sin_pi(x[0]);
      j.value = s;
      j.grad[0] = pi * cos_pi(x[0]);
      j.second[0] = -pi * pi * s;
      break;
    }
    case BoundaryMask::sin_pi_x_sin_pi_y: {
      const double sx = sin_pi(x[0]), sy = sin_pi(x[1]);
      j.value = sx * sy;
      j.grad[0] = pi * cos_pi(x[0]) * sy;
      j.grad[1] = pi * sx * cos_pi(x[1]);
      j.second[0] = -pi * pi * sx * sy;
      j.second[1] = -pi * pi * sx * sy;
      break;
    }
  }
  return j;
}

Mlp::Mlp(int p, int l, int q, Activation act, BoundaryMask mask, std::vector<double> weights)
    : p_(p), l_(l), q_(q), act_(act), mask_(mask), w_(std::move(weights)) {
  if (p < 1 || p > 2) throw Error("Mlp: input dimension must be 1 or 2");
  if (w_.size() != weight_count(p, l, q)) throw Error("Mlp: weight vector has the wrong length");
  if ((mask == BoundaryMask::sin_pi_x && p != 1) || (mask == BoundaryMask::sin_pi_x_sin_pi_y && p != 2))
    throw Error("Mlp: mask does not match the input dimension");
  for (double v : w_)
    if (!std::isfinite(v)) throw Error("Mlp: non-finite weight");
}

Mlp Mlp::init_random(int p, int l, int q, Activation act, BoundaryMask mask, std::uint64_t seed, double range,
                     double output_bias) {
  if (!(range > 0.0)) throw Error("init_random: range must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> w(weight_count(p, l, q));
  for (double& v : w) v = dist(rng);
  w.back() = output_bias;
  return Mlp(p, l, q, act, mask, std::move(w));
}

Mlp Mlp::with_weights(std::vector<double> w) const { return Mlp(p_, l_, q_, act_, mask_, std::move(w)); }

double Mlp::forward(const Point& x) const { return forward_with_input_derivs(x).value; }

Jet Mlp::forward_with_input_derivs(const Point& x) const {
  const Layout lo = layout(p_, l_, q_);
  const Trace t = run_forward(*this, lo, x);
  return to_jet(mat_vec(mask_matrix(mask_, x, p_), t.raw, 1 + 2 * p_), p_);
}

Jet Mlp::weight_sensitivities(const Point& x, std::span<Jet> d) const {
  if (d.size() != w_.size()) throw Error("weight_sensitivities: output span has the wrong length");
  const int p = p_, l = l_, q = q_;
  const int C = 1 + 2 * p;
  const Layout lo = layout(p, l, q);
  const Trace t = run_forward(*this, lo, x);
  const Mat g = mask_matrix(mask_, x, p);

  auto column = [&](const Mat& m, int c) {
    Chan v{};
    for (int r = 0; r < C; ++r) v[r] = m[r * kMaxC + c];
    return v;
  };

  d[lo.out_b] = to_jet(column(g, 0), p);
  // adj[j] = d(output jet)/d(a jet of neuron j in the current layer)
  std::vector<Mat> adj(static_cast<std::size_t>(q));
  for (int j = 0; j < q; ++j) {
    d[lo.out_w + j] = to_jet(mat_vec(g, t.a[(l - 1) * q + j], C), p);
    for (int e = 0; e < kMaxC * kMaxC; ++e) adj[j][e] = w_[lo.out_w + j] * g[e];
  }

  std::vector<Mat> sens(static_cast<std::size_t>(q));
  for (int k = l - 1; k >= 0; --k) {
    for (int j = 0; j < q; ++j) {
      const auto idx = static_cast<std::size_t>(k * q + j);
      const ActivationValue& s = t.s[idx];
      const Chan& z = t.z[idx];
      // Jacobian of the activation jet w.r.t. the pre-activation jet.
      Mat tj{};
      tj[0] = s.s1;
      for (int m = 0; m < p; ++m) {
        const int dm = 1 + m, ddm = 1 + p + m;
        tj[dm * kMaxC] = s.s2 * z[dm];
        tj[dm * kMaxC + dm] = s.s1;
        tj[ddm * kMaxC] = s.s3 * z[dm] * z[dm] + s.s2 * z[ddm];
        tj[ddm * kMaxC + dm] = 2.0 * s.s2 * z[dm];
        tj[ddm * kMaxC + ddm] = s.s1;
      }
      Mat& sj = sens[j];
      sj.fill(0.0);
      for (int r = 0; r < C; ++r)
        for (int u = 0; u < C; ++u) {
          const double aru = adj[j][r * kMaxC + u];
          if (aru == 0.0) continue;
          for (int c = 0; c < C; ++c) sj[r * kMaxC + c] += aru * tj[u * kMaxC + c];
        }
      d[lo.b[k] + j] = to_jet(column(sj, 0), p);
    }
    if (k == 0) {
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < q; ++j) {
          Chan v{};
          for (int r = 0; r < C; ++r) v[r] = sens[j][r * kMaxC] * x[i] + sens[j][r * kMaxC + 1 + i];
          d[lo.w[0] + i * q + j] = to_jet(v, p);
        }
    } else {
      for (int i = 0; i < q; ++i) {
        const Chan& ai = t.a[(k - 1) * q + i];
        Mat next{};
        for (int j = 0; j < q; ++j) {
          d[lo.w[k] + i * q + j] = to_jet(mat_vec(sens[j], ai, C), p);
          const double wij = w_[lo.w[k] + i * q + j];
          for (int e = 0; e < kMaxC * kMaxC; ++e) next[e] += wij * sens[j][e];
        }
        adj[i] = next;
      }
    }
  }
  return to_jet(mat_vec(g, t.raw, C), p);
}

WeightSensitivities Mlp::weight_sensitivities(const Point& x) const {
  WeightSensitivities out;
  out.d.resize(w_.size());
  out.output = weight_sensitivities(x, out.d);
  return out;
}

std::string to_json_string(const Mlp& net) {
  nlohmann::json j;
  j["p"] = net.inputs();
  j["l"] = net.hidden_layers();
  j["q"] = net.width();
  j["activation"] = std::string(to_string(net.activation()));
  j["mask"] = std::string(to_string(net.mask()));
  j["weights"] = std::vector<double>(net.weights().begin(), net.weights().end());
  return j.dump();
}

Mlp mlp_from_json_string(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return Mlp(j.at("p").get<int>(), j.at("l").get<int>(), j.at("q").get<int>(),
               parse_activation(j.at("activation").get<std::string>()), parse_mask(j.at("mask").get<std::string>()),
               j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed network checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json_string(net) << '\n';
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return mlp_from_json_string(ss.str());
}

}  // namespace branchtrace
