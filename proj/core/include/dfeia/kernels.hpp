#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "dfeia/tensor.hpp"
#include "dfeia/wavelet.hpp"

// Raw forward/backward math on plain tensors. Every op here is deterministic:
// loops run in a fixed order and reductions accumulate in that order, so a
// repeated call on identical inputs is bit-identical. The taped ops in
// ops.hpp are thin wrappers around these.
namespace dfeia::kernels {

struct Conv2dGeom {
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_h = 0, pad_w = 0;
  int64_t dil_h = 1, dil_w = 1;
  int64_t groups = 1;
};

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride, int64_t pad, int64_t dil) {
  return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                     const Conv2dGeom& g) {
  if (x.rank() != 4) throw ConfigError("conv2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ConfigError("conv2d: weight must be [Cout,Cin/groups,kh,kw], got " + shape_str(w.shape()));
  const int64_t cin = x.dim(1), cout = w.dim(0);
  if (g.groups < 1 || cin % g.groups != 0 || cout % g.groups != 0) {
    throw ConfigError("conv2d: channels (" + std::to_string(cin) + "->" + std::to_string(cout) +
                      ") not divisible by groups=" + std::to_string(g.groups));
  }
  if (w.dim(1) != cin / g.groups) {
    throw ConfigError("conv2d: weight shape " + shape_str(w.shape()) + " does not match input channels " +
                      std::to_string(cin) + " with groups=" + std::to_string(g.groups));
  }
  if (b.numel() != cout) {
    throw ConfigError("conv2d: bias length " + std::to_string(b.numel()) + " != Cout " + std::to_string(cout));
  }
  const int64_t oh = conv_out_extent(x.dim(2), w.dim(2), g.stride_h, g.pad_h, g.dil_h);
  const int64_t ow = conv_out_extent(x.dim(3), w.dim(3), g.stride_w, g.pad_w, g.dil_w);
  if (oh < 1 || ow < 1) {
    throw ConfigError("conv2d: output would be empty for input " + shape_str(x.shape()) +
                      " and kernel " + shape_str(w.shape()));
  }
}

// Pointwise channel mixing, the hot case. Per output element the
// accumulation order (bias, then ascending input channel) matches the
// general loop below, so both paths are bit-identical.
template <typename T>
Tensor<T> conv2d_pointwise(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const int64_t n = x.dim(0), cin = x.dim(1), plane = x.dim(2) * x.dim(3);
  const int64_t cout = w.dim(0);
  Tensor<T> out({n, cout, x.dim(2), x.dim(3)});
  const T* px = x.data();
  const T* pw = w.data();
  const T* pb = b.data();
  T* po = out.mut();
  for (int64_t ni = 0; ni < n; ++ni) {
    const T* xb = px + ni * cin * plane;
    for (int64_t oc = 0; oc < cout; ++oc) {
      T* op = po + (ni * cout + oc) * plane;
      std::fill_n(op, plane, pb[oc]);
      const T* wrow = pw + oc * cin;
      for (int64_t ic = 0; ic < cin; ++ic) {
        const T wv = wrow[ic];
        const T* xp = xb + ic * plane;
        for (int64_t i = 0; i < plane; ++i) op[i] += wv * xp[i];
      }
    }
  }
  return out;
}

// Direct convolution, zero padding. Output element = kernel dot receptive
// field + bias.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, const Conv2dGeom& g) {
  check_conv_args(x, w, b, g);
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0), cpg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (kh == 1 && kw == 1 && g.groups == 1 && g.stride_h == 1 && g.stride_w == 1 &&
      g.pad_h == 0 && g.pad_w == 0) {
    return conv2d_pointwise(x, w, b);
  }
  const int64_t oh = conv_out_extent(h, kh, g.stride_h, g.pad_h, g.dil_h);
  const int64_t ow = conv_out_extent(wd, kw, g.stride_w, g.pad_w, g.dil_w);
  const int64_t cout_pg = cout / g.groups;

  Tensor<T> out({n, cout, oh, ow});
  const T* px = x.data();
  const T* pw = w.data();
  const T* pb = b.data();
  T* po = out.mut();

  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t oc = 0; oc < cout; ++oc) {
      const int64_t ic0 = (oc / cout_pg) * cpg;
      const T* wbase = pw + oc * cpg * kh * kw;
      T* obase = po + (ni * cout + oc) * oh * ow;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          T acc = pb[oc];
          for (int64_t ic = 0; ic < cpg; ++ic) {
            const T* xplane = px + (ni * cin + ic0 + ic) * h * wd;
            const T* wk = wbase + ic * kh * kw;
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
              if (iy < 0 || iy >= h) continue;
              const T* xrow = xplane + iy * wd;
              const T* wrow = wk + ky * kw;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
                if (ix < 0 || ix >= wd) continue;
                acc += wrow[kx] * xrow[ix];
              }
            }
          }
          obase[oy * ow + ox] = acc;
        }
      }
    }
  }
  return out;
}

// Accumulates input/weight/bias gradients; any destination may be null.
template <typename T>
void conv2d_backward(const Tensor<T>& dout, const Tensor<T>& x, const Tensor<T>& w,
                     const Conv2dGeom& g, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int64_t cout = w.dim(0), cpg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int64_t oh = dout.dim(2), ow = dout.dim(3);
  const int64_t cout_pg = cout / g.groups;

  const T* pdo = dout.data();
  const T* px = x.data();
  const T* pw = w.data();
  T* pdx = dx ? dx->mut() : nullptr;
  T* pdw = dw ? dw->mut() : nullptr;
  T* pdb = db ? db->mut() : nullptr;

  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t oc = 0; oc < cout; ++oc) {
      const int64_t ic0 = (oc / cout_pg) * cpg;
      const T* dobase = pdo + (ni * cout + oc) * oh * ow;
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          const T go = dobase[oy * ow + ox];
          if (pdb) pdb[oc] += go;
          if (!pdx && !pdw) continue;
          for (int64_t ic = 0; ic < cpg; ++ic) {
            const int64_t xoff = (ni * cin + ic0 + ic) * h * wd;
            const int64_t woff = (oc * cpg + ic) * kh * kw;
            for (int64_t ky = 0; ky < kh; ++ky) {
              const int64_t iy = oy * g.stride_h - g.pad_h + ky * g.dil_h;
              if (iy < 0 || iy >= h) continue;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t ix = ox * g.stride_w - g.pad_w + kx * g.dil_w;
                if (ix < 0 || ix >= wd) continue;
                if (pdx) pdx[xoff + iy * wd + ix] += go * pw[woff + ky * kw + kx];
                if (pdw) pdw[woff + ky * kw + kx] += go * px[xoff + iy * wd + ix];
              }
            }
          }
        }
      }
    }
  }
}

// Exact GELU, x * Phi(x) with the standard normal CDF.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.mut();
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = static_cast<double>(px[i]);
    po[i] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * M_SQRT1_2)));
  }
  return out;
}

template <typename T>
void gelu_backward(const Tensor<T>& dout, const Tensor<T>& x, Tensor<T>* dx) {
  static const double inv_sqrt_2pi = 0.3989422804014327;
  const T* pdo = dout.data();
  const T* px = x.data();
  T* pdx = dx->mut();
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = static_cast<double>(px[i]);
    const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
    pdx[i] += static_cast<T>(static_cast<double>(pdo[i]) * (cdf + v * pdf));
  }
}

// Global response normalization over [N,C,H,W]:
//   G_c   = L2 norm of channel c over H,W (per sample)
//   N_c   = G_c / (mean_c(G) + eps)
//   out   = gamma_c * (x * N_c) + beta_c + x
// gamma = beta = 0 makes it the exact identity.
template <typename T>
Tensor<T> grn(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  if (x.rank() != 4) throw ConfigError("grn: input must be rank 4, got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ConfigError("grn: gamma/beta length must equal channel count " + std::to_string(c));
  }
  Tensor<T> out(x.shape());
  const T* px = x.data();
  const T* pg = gamma.data();
  const T* pbta = beta.data();
  T* po = out.mut();
  std::vector<double> norms(c);
  for (int64_t ni = 0; ni < n; ++ni) {
    const T* xb = px + ni * c * plane;
    double mean = 0;
    for (int64_t ci = 0; ci < c; ++ci) {
      double ss = 0;
      const T* xc = xb + ci * plane;
      for (int64_t i = 0; i < plane; ++i) ss += static_cast<double>(xc[i]) * static_cast<double>(xc[i]);
      norms[ci] = std::sqrt(ss);
      mean += norms[ci];
    }
    mean /= static_cast<double>(c);
    const double denom = mean + eps;
    T* ob = po + ni * c * plane;
    for (int64_t ci = 0; ci < c; ++ci) {
      const T scale = static_cast<T>(static_cast<double>(pg[ci]) * norms[ci] / denom);
      const T* xc = xb + ci * plane;
      T* oc = ob + ci * plane;
      for (int64_t i = 0; i < plane; ++i) oc[i] = scale * xc[i] + pbta[ci] + xc[i];
    }
  }
  return out;
}

template <typename T>
void grn_backward(const Tensor<T>& dout, const Tensor<T>& x, const Tensor<T>& gamma, double eps,
                  Tensor<T>* dx, Tensor<T>* dgamma, Tensor<T>* dbeta) {
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const T* pdo = dout.data();
  const T* px = x.data();
  const T* pg = gamma.data();
  T* pdx = dx ? dx->mut() : nullptr;
  T* pdg = dgamma ? dgamma->mut() : nullptr;
  T* pdb = dbeta ? dbeta->mut() : nullptr;

  std::vector<double> norms(c), s(c);
  for (int64_t ni = 0; ni < n; ++ni) {
    const T* xb = px + ni * c * plane;
    const T* dob = pdo + ni * c * plane;
    double mean = 0;
    for (int64_t ci = 0; ci < c; ++ci) {
      double ss = 0;
      const T* xc = xb + ci * plane;
      for (int64_t i = 0; i < plane; ++i) ss += static_cast<double>(xc[i]) * static_cast<double>(xc[i]);
      norms[ci] = std::sqrt(ss);
      mean += norms[ci];
    }
    mean /= static_cast<double>(c);
    const double denom = mean + eps;

    // s_c = sum_hw dout * gamma_c * x ; the channel-coupled term below needs
    // both s_c and sum_c s_c * g_c.
    double sg = 0;
    for (int64_t ci = 0; ci < c; ++ci) {
      const T* xc = xb + ci * plane;
      const T* doc = dob + ci * plane;
      double acc = 0;
      for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(doc[i]) * static_cast<double>(xc[i]);
      s[ci] = acc * static_cast<double>(pg[ci]);
      sg += s[ci] * norms[ci];
    }

    for (int64_t ci = 0; ci < c; ++ci) {
      const T* xc = xb + ci * plane;
      const T* doc = dob + ci * plane;
      const double nrm = norms[ci] / denom;
      if (pdb || pdg) {
        double acc_b = 0, acc_g = 0;
        for (int64_t i = 0; i < plane; ++i) {
          acc_b += static_cast<double>(doc[i]);
          acc_g += static_cast<double>(doc[i]) * static_cast<double>(xc[i]);
        }
        if (pdb) pdb[ci] += static_cast<T>(acc_b);
        if (pdg) pdg[ci] += static_cast<T>(acc_g * nrm);
      }
      if (pdx) {
        // dL/dG_c = s_c / denom - (sum s*G) / (C * denom^2); chain through
        // dG_c/dx = x / G_c (zero at the L2-norm origin).
        const double dldg = s[ci] / denom - sg / (static_cast<double>(c) * denom * denom);
        const double gfac = norms[ci] > 0 ? dldg / norms[ci] : 0.0;
        const double direct = 1.0 + static_cast<double>(pg[ci]) * nrm;
        T* dxc = pdx + (ni * c + ci) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          dxc[i] += static_cast<T>(static_cast<double>(doc[i]) * direct +
                                   gfac * static_cast<double>(xc[i]));
        }
      }
    }
  }
}

// Softmax along one axis, max-subtracted for stability.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const int rank = x.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ConfigError("softmax: bad axis");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  const int64_t k = x.dim(axis);
  for (int i = axis + 1; i < rank; ++i) inner *= x.dim(i);

  Tensor<T> out(x.shape());
  const T* px = x.data();
  T* po = out.mut();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const T* sx = px + o * k * inner + in;
      T* so = po + o * k * inner + in;
      T mx = sx[0];
      for (int64_t i = 1; i < k; ++i) mx = std::max(mx, sx[i * inner]);
      double sum = 0;
      for (int64_t i = 0; i < k; ++i) {
        const double e = std::exp(static_cast<double>(sx[i * inner] - mx));
        so[i * inner] = static_cast<T>(e);
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int64_t i = 0; i < k; ++i) so[i * inner] = static_cast<T>(static_cast<double>(so[i * inner]) * inv);
    }
  }
  return out;
}

template <typename T>
void softmax_backward(const Tensor<T>& dout, const Tensor<T>& y, int axis, Tensor<T>* dx) {
  const int rank = y.rank();
  if (axis < 0) axis += rank;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= y.dim(i);
  const int64_t k = y.dim(axis);
  for (int i = axis + 1; i < rank; ++i) inner *= y.dim(i);

  const T* pdo = dout.data();
  const T* py = y.data();
  T* pdx = dx->mut();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * k * inner + in;
      double dot = 0;
      for (int64_t i = 0; i < k; ++i) {
        dot += static_cast<double>(pdo[base + i * inner]) * static_cast<double>(py[base + i * inner]);
      }
      for (int64_t i = 0; i < k; ++i) {
        const int64_t idx = base + i * inner;
        pdx[idx] += static_cast<T>(static_cast<double>(py[idx]) *
                                   (static_cast<double>(pdo[idx]) - dot));
      }
    }
  }
}

inline int64_t batch_count(const Shape& s) {
  int64_t b = 1;
  for (size_t i = 0; i + 2 < s.size(); ++i) b *= s[i];
  return b;
}

// Batched matmul on the trailing two axes; leading axes must match exactly.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false) {
  if (a.rank() < 2 || b.rank() < 2) throw ConfigError("matmul: operands must have rank >= 2");
  if (a.rank() != b.rank()) throw ConfigError("matmul: rank mismatch");
  for (int i = 0; i + 2 < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) throw ConfigError("matmul: batch extents differ");
  }
  const int64_t m = trans_a ? a.dim(a.rank() - 1) : a.dim(a.rank() - 2);
  const int64_t ka = trans_a ? a.dim(a.rank() - 2) : a.dim(a.rank() - 1);
  const int64_t kb = trans_b ? b.dim(b.rank() - 1) : b.dim(b.rank() - 2);
  const int64_t nn = trans_b ? b.dim(b.rank() - 2) : b.dim(b.rank() - 1);
  if (ka != kb) {
    throw ConfigError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Shape oshape(a.shape().begin(), a.shape().end() - 2);
  oshape.push_back(m);
  oshape.push_back(nn);
  Tensor<T> out(std::move(oshape));

  const int64_t batches = batch_count(a.shape());
  const int64_t a_rows = a.dim(a.rank() - 2), a_cols = a.dim(a.rank() - 1);
  const int64_t b_rows = b.dim(b.rank() - 2), b_cols = b.dim(b.rank() - 1);
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.mut();
  for (int64_t bi = 0; bi < batches; ++bi) {
    const T* ab = pa + bi * a_rows * a_cols;
    const T* bb = pb + bi * b_rows * b_cols;
    T* ob = po + bi * m * nn;
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < nn; ++j) {
        double acc = 0;
        for (int64_t kk = 0; kk < ka; ++kk) {
          const T av = trans_a ? ab[kk * a_cols + i] : ab[i * a_cols + kk];
          const T bv = trans_b ? bb[j * b_cols + kk] : bb[kk * b_cols + j];
          acc += static_cast<double>(av) * static_cast<double>(bv);
        }
        ob[i * nn + j] = static_cast<T>(acc);
      }
    }
  }
  return out;
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  if (!dst.same_shape(src)) throw ConfigError("accumulate: shape mismatch");
  T* pd = dst.mut();
  const T* ps = src.data();
  for (int64_t i = 0; i < dst.numel(); ++i) pd[i] += ps[i];
}

template <typename T>
void matmul_backward(const Tensor<T>& dout, const Tensor<T>& a, const Tensor<T>& b,
                     bool trans_a, bool trans_b, Tensor<T>* da, Tensor<T>* db) {
  if (da) {
    Tensor<T> g = trans_a ? matmul<T>(b, dout, trans_b, true) : matmul<T>(dout, b, false, !trans_b);
    accumulate(*da, g);
  }
  if (db) {
    Tensor<T> g = trans_b ? matmul<T>(dout, a, true, trans_a) : matmul<T>(a, dout, !trans_a, false);
    accumulate(*db, g);
  }
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw ConfigError("global_avg_pool: input must be rank 4");
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<T> out({n, c});
  const T* px = x.data();
  T* po = out.mut();
  for (int64_t i = 0; i < n * c; ++i) {
    double acc = 0;
    const T* p = px + i * plane;
    for (int64_t j = 0; j < plane; ++j) acc += static_cast<double>(p[j]);
    po[i] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return out;
}

template <typename T>
void global_avg_pool_backward(const Tensor<T>& dout, const Shape& xshape, Tensor<T>* dx) {
  const int64_t n = xshape[0], c = xshape[1], plane = xshape[2] * xshape[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  const T* pdo = dout.data();
  T* pdx = dx->mut();
  for (int64_t i = 0; i < n * c; ++i) {
    const T g = pdo[i] * inv;
    T* p = pdx + i * plane;
    for (int64_t j = 0; j < plane; ++j) p[j] += g;
  }
}

// Affine map: out[n,k] = sum_f x[n,f] * w[k,f] + b[k].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2) throw ConfigError("linear: x and weight must be rank 2");
  const int64_t n = x.dim(0), f = x.dim(1), k = w.dim(0);
  if (w.dim(1) != f) throw ConfigError("linear: weight shape " + shape_str(w.shape()) + " vs features " + std::to_string(f));
  if (b.numel() != k) throw ConfigError("linear: bias length mismatch");
  Tensor<T> out({n, k});
  const T* px = x.data();
  const T* pw = w.data();
  const T* pb = b.data();
  T* po = out.mut();
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ki = 0; ki < k; ++ki) {
      double acc = static_cast<double>(pb[ki]);
      for (int64_t fi = 0; fi < f; ++fi) {
        acc += static_cast<double>(px[ni * f + fi]) * static_cast<double>(pw[ki * f + fi]);
      }
      po[ni * k + ki] = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
void linear_backward(const Tensor<T>& dout, const Tensor<T>& x, const Tensor<T>& w,
                     Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const int64_t n = x.dim(0), f = x.dim(1), k = w.dim(0);
  const T* pdo = dout.data();
  const T* px = x.data();
  const T* pw = w.data();
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ki = 0; ki < k; ++ki) {
      const T g = pdo[ni * k + ki];
      if (db) db->mut()[ki] += g;
      for (int64_t fi = 0; fi < f; ++fi) {
        if (dx) dx->mut()[ni * f + fi] += g * pw[ki * f + fi];
        if (dw) dw->mut()[ki * f + fi] += g * px[ni * f + fi];
      }
    }
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ConfigError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.mut();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] + pb[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ConfigError("mul: shape mismatch");
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.mut();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] * pb[i];
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape());
  const T* pa = a.data();
  T* po = out.mut();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] * s;
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  double acc = 0;
  const T* pa = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(pa[i]);
  return Tensor<T>::scalar(static_cast<T>(acc));
}

// Channel slice [c0,c1) of a rank-4 tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int64_t c0, int64_t c1) {
  if (x.rank() != 4) throw ConfigError("slice_channels: input must be rank 4");
  const int64_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (c0 < 0 || c1 > c || c0 >= c1) throw ConfigError("slice_channels: bad range");
  Tensor<T> out({n, c1 - c0, x.dim(2), x.dim(3)});
  const T* px = x.data();
  T* po = out.mut();
  const int64_t span = (c1 - c0) * plane;
  for (int64_t ni = 0; ni < n; ++ni) {
    std::copy(px + (ni * c + c0) * plane, px + (ni * c + c0) * plane + span, po + ni * span);
  }
  return out;
}

template <typename T>
void slice_channels_backward(const Tensor<T>& dout, int64_t c0, Tensor<T>* dx) {
  const int64_t n = dx->dim(0), c = dx->dim(1), plane = dx->dim(2) * dx->dim(3);
  const int64_t cs = dout.dim(1);
  const T* pdo = dout.data();
  T* pdx = dx->mut();
  for (int64_t ni = 0; ni < n; ++ni) {
    const T* src = pdo + ni * cs * plane;
    T* dst = pdx + (ni * c + c0) * plane;
    for (int64_t i = 0; i < cs * plane; ++i) dst[i] += src[i];
  }
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ConfigError("concat_channels: no inputs");
  const int64_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int64_t ctot = 0;
  for (const auto& p : parts) {
    if (p.rank() != 4 || p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
      throw ConfigError("concat_channels: incompatible shapes");
    }
    ctot += p.dim(1);
  }
  Tensor<T> out({n, ctot, h, w});
  T* po = out.mut();
  const int64_t plane = h * w;
  for (int64_t ni = 0; ni < n; ++ni) {
    int64_t coff = 0;
    for (const auto& p : parts) {
      const int64_t span = p.dim(1) * plane;
      std::copy(p.data() + ni * span, p.data() + (ni + 1) * span, po + (ni * ctot + coff) * plane);
      coff += p.dim(1);
    }
  }
  return out;
}

// Materialized axis permutation.
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& axes) {
  const int rank = x.rank();
  if (static_cast<int>(axes.size()) != rank) throw ConfigError("permute: wrong axis count");
  Shape oshape(rank);
  for (int i = 0; i < rank; ++i) oshape[i] = x.dim(axes[i]);
  Tensor<T> out(oshape);

  std::vector<int64_t> xstr(rank, 1), ostr(rank, 1);
  for (int i = rank - 2; i >= 0; --i) xstr[i] = xstr[i + 1] * x.dim(i + 1);
  for (int i = rank - 2; i >= 0; --i) ostr[i] = ostr[i + 1] * oshape[i + 1];

  const T* px = x.data();
  T* po = out.mut();
  std::vector<int64_t> idx(rank, 0);
  const int64_t total = x.numel();
  for (int64_t flat = 0; flat < total; ++flat) {
    int64_t rem = flat, src = 0;
    for (int i = 0; i < rank; ++i) {
      const int64_t q = rem / ostr[i];
      rem -= q * ostr[i];
      src += q * xstr[axes[i]];
    }
    po[flat] = px[src];
  }
  return out;
}

inline std::vector<int> inverse_permutation(const std::vector<int>& axes) {
  std::vector<int> inv(axes.size());
  for (size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = static_cast<int>(i);
  return inv;
}

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2) throw ConfigError("cross_entropy: logits must be [N,K]");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n) throw UsageError("cross_entropy: label count mismatch");
  const T* pl = logits.data();
  double loss = 0;
  for (int64_t ni = 0; ni < n; ++ni) {
    const int lab = labels[ni];
    if (lab < 0 || lab >= k) {
      throw UsageError("cross_entropy: label " + std::to_string(lab) + " out of range [0," + std::to_string(k) + ")");
    }
    const T* row = pl + ni * k;
    double mx = static_cast<double>(row[0]);
    for (int64_t i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(row[i]));
    double se = 0;
    for (int64_t i = 0; i < k; ++i) se += std::exp(static_cast<double>(row[i]) - mx);
    loss += (mx + std::log(se)) - static_cast<double>(row[lab]);
  }
  return Tensor<T>::scalar(static_cast<T>(loss / static_cast<double>(n)));
}

template <typename T>
void cross_entropy_backward(const Tensor<T>& dout, const Tensor<T>& logits,
                            const std::vector<int>& labels, Tensor<T>* dlogits) {
  const int64_t n = logits.dim(0), k = logits.dim(1);
  const double g = static_cast<double>(dout.data()[0]) / static_cast<double>(n);
  const T* pl = logits.data();
  T* pd = dlogits->mut();
  for (int64_t ni = 0; ni < n; ++ni) {
    const T* row = pl + ni * k;
    double mx = static_cast<double>(row[0]);
    for (int64_t i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(row[i]));
    double se = 0;
    for (int64_t i = 0; i < k; ++i) se += std::exp(static_cast<double>(row[i]) - mx);
    for (int64_t i = 0; i < k; ++i) {
      const double p = std::exp(static_cast<double>(row[i]) - mx) / se;
      pd[ni * k + i] += static_cast<T>(g * (p - (i == labels[ni] ? 1.0 : 0.0)));
    }
  }
}

}  // namespace dfeia::kernels
