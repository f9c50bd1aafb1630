#include "retfuse/nn/kernels.hpp"

#include <cmath>

namespace retfuse::nn {

namespace {

using std::size_t;
using Index = long long;

inline Index ceil_div(Index a, Index b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

// Output-column range [lo, hi] for which the input column iw = ow*stride+k-pad
// stays inside [0, limit).
inline void valid_range(Index k, Index pad, Index stride, Index limit, Index out_dim, Index& lo,
                        Index& hi) {
  lo = ceil_div(pad - k, stride);
  if (lo < 0) lo = 0;
  hi = (limit - 1 - k + pad) / stride;
  if (hi > out_dim - 1) hi = out_dim - 1;
}

}  // namespace

namespace kernels {

void conv2d_forward(const Tensor& x, const Tensor& w, int stride, int pad, Tensor& y) {
  const Index B = static_cast<Index>(x.dim(0)), IC = static_cast<Index>(x.dim(1));
  const Index H = static_cast<Index>(x.dim(2)), W = static_cast<Index>(x.dim(3));
  const Index OC = static_cast<Index>(w.dim(0)), KH = static_cast<Index>(w.dim(2));
  const Index KW = static_cast<Index>(w.dim(3));
  const Index OH = (H + 2 * pad - KH) / stride + 1;
  const Index OW = (W + 2 * pad - KW) / stride + 1;
  y = Tensor({static_cast<size_t>(B), static_cast<size_t>(OC), static_cast<size_t>(OH),
              static_cast<size_t>(OW)});

  const double* xd = x.data();
  const double* wd = w.data();
  double* yd = y.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (Index b = 0; b < B; ++b) {
    for (Index oc = 0; oc < OC; ++oc) {
      double* yplane = yd + (b * OC + oc) * OH * OW;
      for (Index ic = 0; ic < IC; ++ic) {
        const double* xplane = xd + (b * IC + ic) * H * W;
        const double* wbase = wd + (oc * IC + ic) * KH * KW;
        for (Index kh = 0; kh < KH; ++kh) {
          for (Index kw = 0; kw < KW; ++kw) {
            const double wv = wbase[kh * KW + kw];
            Index oh_lo, oh_hi, ow_lo, ow_hi;
            valid_range(kh, pad, stride, H, OH, oh_lo, oh_hi);
            valid_range(kw, pad, stride, W, OW, ow_lo, ow_hi);
            for (Index oh = oh_lo; oh <= oh_hi; ++oh) {
              const Index ih = oh * stride + kh - pad;
              const double* xrow = xplane + ih * W + (ow_lo * stride + kw - pad);
              double* yrow = yplane + oh * OW + ow_lo;
              const Index n = ow_hi - ow_lo + 1;
              if (stride == 1) {
                for (Index i = 0; i < n; ++i) yrow[i] += wv * xrow[i];
              } else {
                for (Index i = 0; i < n; ++i) yrow[i] += wv * xrow[i * stride];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const Tensor& w, const Tensor& gy, int stride, int pad, Tensor& gx) {
  const Index B = static_cast<Index>(gy.dim(0)), OC = static_cast<Index>(gy.dim(1));
  const Index OH = static_cast<Index>(gy.dim(2)), OW = static_cast<Index>(gy.dim(3));
  const Index IC = static_cast<Index>(w.dim(1)), KH = static_cast<Index>(w.dim(2));
  const Index KW = static_cast<Index>(w.dim(3));
  const Index H = static_cast<Index>(gx.dim(2)), W = static_cast<Index>(gx.dim(3));

  const double* wd = w.data();
  const double* gyd = gy.data();
  double* gxd = gx.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (Index b = 0; b < B; ++b) {
    for (Index ic = 0; ic < IC; ++ic) {
      double* gxplane = gxd + (b * IC + ic) * H * W;
      for (Index i = 0; i < H * W; ++i) gxplane[i] = 0.0;
      for (Index oc = 0; oc < OC; ++oc) {
        const double* gyplane = gyd + (b * OC + oc) * OH * OW;
        const double* wbase = wd + (oc * IC + ic) * KH * KW;
        for (Index kh = 0; kh < KH; ++kh) {
          for (Index kw = 0; kw < KW; ++kw) {
            const double wv = wbase[kh * KW + kw];
            Index oh_lo, oh_hi, ow_lo, ow_hi;
            valid_range(kh, pad, stride, H, OH, oh_lo, oh_hi);
            valid_range(kw, pad, stride, W, OW, ow_lo, ow_hi);
            for (Index oh = oh_lo; oh <= oh_hi; ++oh) {
              const Index ih = oh * stride + kh - pad;
              double* gxrow = gxplane + ih * W + (ow_lo * stride + kw - pad);
              const double* gyrow = gyplane + oh * OW + ow_lo;
              const Index n = ow_hi - ow_lo + 1;
              if (stride == 1) {
                for (Index i = 0; i < n; ++i) gxrow[i] += wv * gyrow[i];
              } else {
                for (Index i = 0; i < n; ++i) gxrow[i * stride] += wv * gyrow[i];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const Tensor& x, const Tensor& gy, int stride, int pad, Tensor& gw) {
  const Index B = static_cast<Index>(x.dim(0)), IC = static_cast<Index>(x.dim(1));
  const Index H = static_cast<Index>(x.dim(2)), W = static_cast<Index>(x.dim(3));
  const Index OC = static_cast<Index>(gy.dim(1)), OH = static_cast<Index>(gy.dim(2));
  const Index OW = static_cast<Index>(gy.dim(3));
  const Index KH = static_cast<Index>(gw.dim(2)), KW = static_cast<Index>(gw.dim(3));

  const double* xd = x.data();
  const double* gyd = gy.data();
  double* gwd = gw.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (Index oc = 0; oc < OC; ++oc) {
    for (Index ic = 0; ic < IC; ++ic) {
      double* gwbase = gwd + (oc * IC + ic) * KH * KW;
      for (Index kh = 0; kh < KH; ++kh) {
        for (Index kw = 0; kw < KW; ++kw) {
          Index oh_lo, oh_hi, ow_lo, ow_hi;
          valid_range(kh, pad, stride, H, OH, oh_lo, oh_hi);
          valid_range(kw, pad, stride, W, OW, ow_lo, ow_hi);
          double acc = 0.0;
          for (Index b = 0; b < B; ++b) {
            const double* xplane = xd + (b * IC + ic) * H * W;
            const double* gyplane = gyd + (b * OC + oc) * OH * OW;
            for (Index oh = oh_lo; oh <= oh_hi; ++oh) {
              const Index ih = oh * stride + kh - pad;
              const double* xrow = xplane + ih * W + (ow_lo * stride + kw - pad);
              const double* gyrow = gyplane + oh * OW + ow_lo;
              const Index n = ow_hi - ow_lo + 1;
              if (stride == 1) {
                for (Index i = 0; i < n; ++i) acc += xrow[i] * gyrow[i];
              } else {
                for (Index i = 0; i < n; ++i) acc += xrow[i * stride] * gyrow[i];
              }
            }
          }
          gwbase[kh * KW + kw] = acc;
        }
      }
    }
  }
}

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
  const Index B = static_cast<Index>(x.dim(0)), IN = static_cast<Index>(x.dim(1));
  const Index OUT = static_cast<Index>(w.dim(1));
  y = Tensor({static_cast<size_t>(B), static_cast<size_t>(OUT)});
  const double* xd = x.data();
  const double* wd = w.data();
  const double* bd = b.data();
  double* yd = y.data();

#pragma omp parallel for schedule(static)
  for (Index row = 0; row < B; ++row) {
    double* yrow = yd + row * OUT;
    for (Index o = 0; o < OUT; ++o) yrow[o] = bd[o];
    const double* xrow = xd + row * IN;
    for (Index i = 0; i < IN; ++i) {
      const double xv = xrow[i];
      const double* wrow = wd + i * OUT;
      for (Index o = 0; o < OUT; ++o) yrow[o] += xv * wrow[o];
    }
  }
}

void dense_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx) {
  const Index B = static_cast<Index>(gy.dim(0)), OUT = static_cast<Index>(gy.dim(1));
  const Index IN = static_cast<Index>(w.dim(0));
  gx = Tensor({static_cast<size_t>(B), static_cast<size_t>(IN)});
  const double* gyd = gy.data();
  const double* wd = w.data();
  double* gxd = gx.data();

#pragma omp parallel for schedule(static)
  for (Index row = 0; row < B; ++row) {
    const double* gyrow = gyd + row * OUT;
    double* gxrow = gxd + row * IN;
    for (Index i = 0; i < IN; ++i) {
      const double* wrow = wd + i * OUT;
      double acc = 0.0;
      for (Index o = 0; o < OUT; ++o) acc += gyrow[o] * wrow[o];
      gxrow[i] = acc;
    }
  }
}

void dense_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor& gb) {
  const Index B = static_cast<Index>(x.dim(0)), IN = static_cast<Index>(x.dim(1));
  const Index OUT = static_cast<Index>(gy.dim(1));
  const double* xd = x.data();
  const double* gyd = gy.data();
  double* gwd = gw.data();
  double* gbd = gb.data();

#pragma omp parallel for schedule(static)
  for (Index i = 0; i < IN; ++i) {
    double* gwrow = gwd + i * OUT;
    for (Index o = 0; o < OUT; ++o) gwrow[o] = 0.0;
    for (Index row = 0; row < B; ++row) {
      const double xv = xd[row * IN + i];
      const double* gyrow = gyd + row * OUT;
      for (Index o = 0; o < OUT; ++o) gwrow[o] += xv * gyrow[o];
    }
  }

  for (Index o = 0; o < OUT; ++o) {
    double acc = 0.0;
    for (Index row = 0; row < B; ++row) acc += gyd[row * OUT + o];
    gbd[o] = acc;
  }
}

void bn_stats(const Tensor& x, std::size_t b, std::size_t c, std::size_t s, Tensor& mean,
              Tensor& var) {
  const Index B = static_cast<Index>(b), C = static_cast<Index>(c), S = static_cast<Index>(s);
  const double n = static_cast<double>(B * S);
  const double* xd = x.data();
  double* md = mean.data();
  double* vd = var.data();

#pragma omp parallel for schedule(static)
  for (Index ch = 0; ch < C; ++ch) {
    double sum = 0.0;
    for (Index row = 0; row < B; ++row) {
      const double* base = xd + (row * C + ch) * S;
      for (Index i = 0; i < S; ++i) sum += base[i];
    }
    const double m = sum / n;
    double sq = 0.0;
    for (Index row = 0; row < B; ++row) {
      const double* base = xd + (row * C + ch) * S;
      for (Index i = 0; i < S; ++i) {
        const double d = base[i] - m;
        sq += d * d;
      }
    }
    md[ch] = m;
    vd[ch] = sq / n;
  }
}

void bn_apply(const Tensor& x, std::size_t b, std::size_t c, std::size_t s, const Tensor& mean,
              const Tensor& inv_std, const Tensor& gamma, const Tensor& beta, Tensor& x_hat,
              Tensor& y) {
  const Index B = static_cast<Index>(b), C = static_cast<Index>(c), S = static_cast<Index>(s);
  const double* xd = x.data();
  double* xh = x_hat.data();
  double* yd = y.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (Index row = 0; row < B; ++row) {
    for (Index ch = 0; ch < C; ++ch) {
      const double m = mean[ch], is = inv_std[ch], g = gamma[ch], bt = beta[ch];
      const double* xb = xd + (row * C + ch) * S;
      double* hb = xh + (row * C + ch) * S;
      double* yb = yd + (row * C + ch) * S;
      for (Index i = 0; i < S; ++i) {
        const double h = (xb[i] - m) * is;
        hb[i] = h;
        yb[i] = g * h + bt;
      }
    }
  }
}

void bn_backward(const Tensor& x_hat, std::size_t b, std::size_t c, std::size_t s,
                 const Tensor& inv_std, const Tensor& gamma, const Tensor& gy, Tensor& gx,
                 Tensor& ggamma, Tensor& gbeta) {
  const Index B = static_cast<Index>(b), C = static_cast<Index>(c), S = static_cast<Index>(s);
  const double n = static_cast<double>(B * S);
  const double* xh = x_hat.data();
  const double* gyd = gy.data();
  double* gxd = gx.data();

#pragma omp parallel for schedule(static)
  for (Index ch = 0; ch < C; ++ch) {
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (Index row = 0; row < B; ++row) {
      const Index base = (row * C + ch) * S;
      for (Index i = 0; i < S; ++i) {
        sum_gy += gyd[base + i];
        sum_gy_xhat += gyd[base + i] * xh[base + i];
      }
    }
    ggamma[ch] = sum_gy_xhat;
    gbeta[ch] = sum_gy;
    const double scale = gamma[ch] * inv_std[ch];
    for (Index row = 0; row < B; ++row) {
      const Index base = (row * C + ch) * S;
      for (Index i = 0; i < S; ++i) {
        gxd[base + i] =
            scale * (gyd[base + i] - (sum_gy + xh[base + i] * sum_gy_xhat) / n);
      }
    }
  }
}

void relu_forward(const Tensor& x, Tensor& y) {
  const Index n = static_cast<Index>(x.size());
  const double* xd = x.data();
  double* yd = y.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
}

void relu_backward(const Tensor& y, const Tensor& gy, Tensor& gx) {
  const Index n = static_cast<Index>(y.size());
  const double* yd = y.data();
  const double* gyd = gy.data();
  double* gxd = gx.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) gxd[i] = yd[i] > 0.0 ? gyd[i] : 0.0;
}

void gap_forward(const Tensor& x, Tensor& y) {
  const Index B = static_cast<Index>(x.dim(0)), C = static_cast<Index>(x.dim(1));
  const Index S = static_cast<Index>(x.dim(2) * x.dim(3));
  const double* xd = x.data();
  double* yd = y.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index row = 0; row < B; ++row) {
    for (Index ch = 0; ch < C; ++ch) {
      const double* base = xd + (row * C + ch) * S;
      double acc = 0.0;
      for (Index i = 0; i < S; ++i) acc += base[i];
      yd[row * C + ch] = acc / static_cast<double>(S);
    }
  }
}

void gap_backward(const Tensor& gy, std::size_t h, std::size_t w, Tensor& gx) {
  const Index B = static_cast<Index>(gy.dim(0)), C = static_cast<Index>(gy.dim(1));
  const Index S = static_cast<Index>(h * w);
  const double* gyd = gy.data();
  double* gxd = gx.data();
#pragma omp parallel for collapse(2) schedule(static)
  for (Index row = 0; row < B; ++row) {
    for (Index ch = 0; ch < C; ++ch) {
      const double g = gyd[row * C + ch] / static_cast<double>(S);
      double* base = gxd + (row * C + ch) * S;
      for (Index i = 0; i < S; ++i) base[i] = g;
    }
  }
}

void add(const Tensor& a, const Tensor& b, Tensor& y) {
  const Index n = static_cast<Index>(a.size());
  const double* ad = a.data();
  const double* bd = b.data();
  double* yd = y.data();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) yd[i] = ad[i] + bd[i];
}

}  // namespace kernels

namespace ref {

void conv2d_forward(const Tensor& x, const Tensor& w, int stride, int pad, Tensor& y) {
  const Index B = static_cast<Index>(x.dim(0)), IC = static_cast<Index>(x.dim(1));
  const Index H = static_cast<Index>(x.dim(2)), W = static_cast<Index>(x.dim(3));
  const Index OC = static_cast<Index>(w.dim(0)), KH = static_cast<Index>(w.dim(2));
  const Index KW = static_cast<Index>(w.dim(3));
  const Index OH = (H + 2 * pad - KH) / stride + 1;
  const Index OW = (W + 2 * pad - KW) / stride + 1;
  y = Tensor({static_cast<size_t>(B), static_cast<size_t>(OC), static_cast<size_t>(OH),
              static_cast<size_t>(OW)});

  for (Index b = 0; b < B; ++b)
    for (Index oc = 0; oc < OC; ++oc)
      for (Index ic = 0; ic < IC; ++ic)
        for (Index kh = 0; kh < KH; ++kh)
          for (Index kw = 0; kw < KW; ++kw) {
            const double wv = w[((oc * IC + ic) * KH + kh) * KW + kw];
            for (Index oh = 0; oh < OH; ++oh) {
              const Index ih = oh * stride + kh - pad;
              if (ih < 0 || ih >= H) continue;
              for (Index ow = 0; ow < OW; ++ow) {
                const Index iw = ow * stride + kw - pad;
                if (iw < 0 || iw >= W) continue;
                y[((b * OC + oc) * OH + oh) * OW + ow] +=
                    wv * x[((b * IC + ic) * H + ih) * W + iw];
              }
            }
          }
}

void conv2d_backward_input(const Tensor& w, const Tensor& gy, int stride, int pad, Tensor& gx) {
  const Index B = static_cast<Index>(gy.dim(0)), OC = static_cast<Index>(gy.dim(1));
  const Index OH = static_cast<Index>(gy.dim(2)), OW = static_cast<Index>(gy.dim(3));
  const Index IC = static_cast<Index>(w.dim(1)), KH = static_cast<Index>(w.dim(2));
  const Index KW = static_cast<Index>(w.dim(3));
  const Index H = static_cast<Index>(gx.dim(2)), W = static_cast<Index>(gx.dim(3));

  gx.fill(0.0);
  for (Index b = 0; b < B; ++b)
    for (Index ic = 0; ic < IC; ++ic)
      for (Index oc = 0; oc < OC; ++oc)
        for (Index kh = 0; kh < KH; ++kh)
          for (Index kw = 0; kw < KW; ++kw) {
            const double wv = w[((oc * IC + ic) * KH + kh) * KW + kw];
            for (Index oh = 0; oh < OH; ++oh) {
              const Index ih = oh * stride + kh - pad;
              if (ih < 0 || ih >= H) continue;
              for (Index ow = 0; ow < OW; ++ow) {
                const Index iw = ow * stride + kw - pad;
                if (iw < 0 || iw >= W) continue;
                gx[((b * IC + ic) * H + ih) * W + iw] +=
                    wv * gy[((b * OC + oc) * OH + oh) * OW + ow];
              }
            }
          }
}

void conv2d_backward_weight(const Tensor& x, const Tensor& gy, int stride, int pad, Tensor& gw) {
  const Index B = static_cast<Index>(x.dim(0)), IC = static_cast<Index>(x.dim(1));
  const Index H = static_cast<Index>(x.dim(2)), W = static_cast<Index>(x.dim(3));
  const Index OC = static_cast<Index>(gy.dim(1)), OH = static_cast<Index>(gy.dim(2));
  const Index OW = static_cast<Index>(gy.dim(3));
  const Index KH = static_cast<Index>(gw.dim(2)), KW = static_cast<Index>(gw.dim(3));

  for (Index oc = 0; oc < OC; ++oc)
    for (Index ic = 0; ic < IC; ++ic)
      for (Index kh = 0; kh < KH; ++kh)
        for (Index kw = 0; kw < KW; ++kw) {
          double acc = 0.0;
          for (Index b = 0; b < B; ++b)
            for (Index oh = 0; oh < OH; ++oh) {
              const Index ih = oh * stride + kh - pad;
              if (ih < 0 || ih >= H) continue;
              for (Index ow = 0; ow < OW; ++ow) {
                const Index iw = ow * stride + kw - pad;
                if (iw < 0 || iw >= W) continue;
                acc += x[((b * IC + ic) * H + ih) * W + iw] *
                       gy[((b * OC + oc) * OH + oh) * OW + ow];
              }
            }
          gw[((oc * IC + ic) * KH + kh) * KW + kw] = acc;
        }
}

void dense_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
  const Index B = static_cast<Index>(x.dim(0)), IN = static_cast<Index>(x.dim(1));
  const Index OUT = static_cast<Index>(w.dim(1));
  y = Tensor({static_cast<size_t>(B), static_cast<size_t>(OUT)});
  for (Index row = 0; row < B; ++row)
    for (Index o = 0; o < OUT; ++o) {
      double acc = b[o];
      for (Index i = 0; i < IN; ++i) acc += x[row * IN + i] * w[i * OUT + o];
      y[row * OUT + o] = acc;
    }
}

void dense_backward_input(const Tensor& gy, const Tensor& w, Tensor& gx) {
  const Index B = static_cast<Index>(gy.dim(0)), OUT = static_cast<Index>(gy.dim(1));
  const Index IN = static_cast<Index>(w.dim(0));
  gx = Tensor({static_cast<size_t>(B), static_cast<size_t>(IN)});
  for (Index row = 0; row < B; ++row)
    for (Index i = 0; i < IN; ++i) {
      double acc = 0.0;
      for (Index o = 0; o < OUT; ++o) acc += gy[row * OUT + o] * w[i * OUT + o];
      gx[row * IN + i] = acc;
    }
}

void dense_backward_params(const Tensor& x, const Tensor& gy, Tensor& gw, Tensor& gb) {
  const Index B = static_cast<Index>(x.dim(0)), IN = static_cast<Index>(x.dim(1));
  const Index OUT = static_cast<Index>(gy.dim(1));
  for (Index i = 0; i < IN; ++i)
    for (Index o = 0; o < OUT; ++o) {
      double acc = 0.0;
      for (Index row = 0; row < B; ++row) acc += x[row * IN + i] * gy[row * OUT + o];
      gw[i * OUT + o] = acc;
    }
  for (Index o = 0; o < OUT; ++o) {
    double acc = 0.0;
    for (Index row = 0; row < B; ++row) acc += gy[row * OUT + o];
    gb[o] = acc;
  }
}

void bn_stats(const Tensor& x, std::size_t b, std::size_t c, std::size_t s, Tensor& mean,
              Tensor& var) {
  const Index B = static_cast<Index>(b), C = static_cast<Index>(c), S = static_cast<Index>(s);
  const double n = static_cast<double>(B * S);
  for (Index ch = 0; ch < C; ++ch) {
    double sum = 0.0;
    for (Index row = 0; row < B; ++row)
      for (Index i = 0; i < S; ++i) sum += x[(row * C + ch) * S + i];
    const double m = sum / n;
    double sq = 0.0;
    for (Index row = 0; row < B; ++row)
      for (Index i = 0; i < S; ++i) {
        const double d = x[(row * C + ch) * S + i] - m;
        sq += d * d;
      }
    mean[ch] = m;
    var[ch] = sq / n;
  }
}

}  // namespace ref

}  // namespace retfuse::nn
