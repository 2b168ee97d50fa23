#pragma once

#include "dfeia/tensor.hpp"

namespace dfeia {

// The four half-resolution components of a single-level 2-D orthonormal Haar
// transform, each [N,C,H/2,W/2]. Subband letters follow the usual
// low/high-pass naming; the defining formulas are in dwt2 below.
template <typename T>
struct SubbandSet {
  Tensor<T> ll, lh, hl, hh;
};

namespace wavelet {

// Stacked layout [N,4C,H/2,W/2] with channel blocks ordered LL|LH|HL|HH.
// For every non-overlapping 2x2 input block [[a,b],[c,d]]:
//   LL = (a+b+c+d)/2    LH = ((a+b)-(c+d))/2
//   HL = ((a+c)-(b+d))/2    HH = (a-b-c+d)/2
// The 4x4 analysis matrix is orthogonal, so energy is preserved and the
// synthesis transform below is its exact inverse (and its adjoint).
template <typename T>
Tensor<T> dwt2_stacked(const Tensor<T>& x) {
  if (x.rank() != 4) throw ConfigError("dwt2: expected rank-4 input, got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ConfigError("dwt2: spatial extents must be even, got " + shape_str(x.shape()));
  }
  const int64_t hh = h / 2, hw = w / 2;
  Tensor<T> out({n, 4 * c, hh, hw});
  const T* px = x.data();
  T* po = out.mut();
  const int64_t plane = h * w, oplane = hh * hw;
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      const T* in = px + (ni * c + ci) * plane;
      T* ll = po + ((ni * 4 + 0) * c + ci) * oplane;
      T* lh = po + ((ni * 4 + 1) * c + ci) * oplane;
      T* hl = po + ((ni * 4 + 2) * c + ci) * oplane;
      T* dd = po + ((ni * 4 + 3) * c + ci) * oplane;
      for (int64_t i = 0; i < hh; ++i) {
        const T* r0 = in + (2 * i) * w;
        const T* r1 = r0 + w;
        for (int64_t j = 0; j < hw; ++j) {
          const T a = r0[2 * j], b = r0[2 * j + 1];
          const T cc = r1[2 * j], d = r1[2 * j + 1];
          const int64_t o = i * hw + j;
          ll[o] = (a + b + cc + d) / T(2);
          lh[o] = ((a + b) - (cc + d)) / T(2);
          hl[o] = ((a + cc) - (b + d)) / T(2);
          dd[o] = (a - b - cc + d) / T(2);
        }
      }
    }
  }
  return out;
}

// Exact inverse of dwt2_stacked:
//   a = (LL+LH+HL+HH)/2    b = (LL+LH-HL-HH)/2
//   c = (LL-LH+HL-HH)/2    d = (LL-LH-HL+HH)/2
template <typename T>
Tensor<T> idwt2_stacked(const Tensor<T>& s) {
  if (s.rank() != 4) throw ConfigError("idwt2: expected rank-4 input, got " + shape_str(s.shape()));
  const int64_t n = s.dim(0), c4 = s.dim(1), hh = s.dim(2), hw = s.dim(3);
  if (c4 % 4 != 0) {
    throw ConfigError("idwt2: channel extent must hold four subbands, got " + shape_str(s.shape()));
  }
  const int64_t c = c4 / 4;
  const int64_t h = hh * 2, w = hw * 2;
  Tensor<T> out({n, c, h, w});
  const T* ps = s.data();
  T* po = out.mut();
  const int64_t plane = h * w, splane = hh * hw;
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      T* dst = po + (ni * c + ci) * plane;
      const T* ll = ps + ((ni * 4 + 0) * c + ci) * splane;
      const T* lh = ps + ((ni * 4 + 1) * c + ci) * splane;
      const T* hl = ps + ((ni * 4 + 2) * c + ci) * splane;
      const T* dd = ps + ((ni * 4 + 3) * c + ci) * splane;
      for (int64_t i = 0; i < hh; ++i) {
        T* r0 = dst + (2 * i) * w;
        T* r1 = r0 + w;
        for (int64_t j = 0; j < hw; ++j) {
          const int64_t o = i * hw + j;
          const T sll = ll[o], slh = lh[o], shl = hl[o], shh = dd[o];
          r0[2 * j] = (sll + slh + shl + shh) / T(2);
          r0[2 * j + 1] = (sll + slh - shl - shh) / T(2);
          r1[2 * j] = (sll - slh + shl - shh) / T(2);
          r1[2 * j + 1] = (sll - slh - shl + shh) / T(2);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> subband_view(const Tensor<T>& stacked, int which) {
  const int64_t n = stacked.dim(0), c = stacked.dim(1) / 4;
  const int64_t hh = stacked.dim(2), hw = stacked.dim(3);
  Tensor<T> out({n, c, hh, hw});
  const int64_t splane = c * hh * hw;
  const T* ps = stacked.data();
  T* po = out.mut();
  for (int64_t ni = 0; ni < n; ++ni) {
    const T* src = ps + (ni * 4 + which) * splane;
    std::copy(src, src + splane, po + ni * splane);
  }
  return out;
}

}  // namespace wavelet

template <typename T>
SubbandSet<T> dwt2(const Tensor<T>& x) {
  Tensor<T> s = wavelet::dwt2_stacked(x);
  return SubbandSet<T>{wavelet::subband_view(s, 0), wavelet::subband_view(s, 1),
                       wavelet::subband_view(s, 2), wavelet::subband_view(s, 3)};
}

template <typename T>
Tensor<T> idwt2(const SubbandSet<T>& s) {
  if (!s.ll.same_shape(s.lh) || !s.ll.same_shape(s.hl) || !s.ll.same_shape(s.hh)) {
    throw ConfigError("idwt2: subband shapes differ");
  }
  const int64_t n = s.ll.dim(0), c = s.ll.dim(1), hh = s.ll.dim(2), hw = s.ll.dim(3);
  Tensor<T> stacked({n, 4 * c, hh, hw});
  T* po = stacked.mut();
  const int64_t splane = c * hh * hw;
  const Tensor<T>* subs[4] = {&s.ll, &s.lh, &s.hl, &s.hh};
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int b = 0; b < 4; ++b) {
      const T* src = subs[b]->data() + ni * splane;
      std::copy(src, src + splane, po + (ni * 4 + b) * splane);
    }
  }
  return wavelet::idwt2_stacked(stacked);
}

}  // namespace dfeia
