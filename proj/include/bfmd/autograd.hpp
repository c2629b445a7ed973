// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small define-by-run reverse-mode autodiff over Tens<S>. Graphs are built
// per forward pass and discarded; parameters are long-lived leaf nodes whose
// gradients must be zeroed between passes (the optimizer does). Scalar type
// is a template parameter: float for training, double for finite-difference
// verification.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "bfmd/tensor.hpp"

namespace bfmd::nn {

template <class S>
struct Node {
  Tens<S> value;
  Tens<S> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>*)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad = Tens<S>(value.shape);
  }
  void zero_grad() {
    if (!grad.empty()) grad.fill(S(0));
  }
};

template <class S>
using Ref = std::shared_ptr<Node<S>>;

template <class S>
Ref<S> leaf(Tens<S> value, bool requires_grad = false, std::string name = "") {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

template <class S>
Ref<S> make_op(Tens<S> value, std::vector<Ref<S>> parents,
               std::function<void(Node<S>*)> backward_fn) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  n->parents = std::move(parents);
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

// Reverse topological sweep from a scalar root.
template <class S>
void backward(const Ref<S>& root) {
  if (root->value.numel() != 1)
    throw ShapeMismatch("backward: root must be a scalar");

  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  struct Frame {
    Node<S>* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Node<S>* p = f.node->parents[f.next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad.data[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (!n->requires_grad || !n->backward_fn || n->grad.empty()) continue;
    n->backward_fn(n);
  }
}

// --- elementwise & broadcast ------------------------------------------------

template <class S>
Ref<S> add(Ref<S> a, Ref<S> b) {
  if (a->value.shape != b->value.shape) throw ShapeMismatch("add: shape mismatch");
  Tens<S> out(a->value.shape);
  const long n = out.numel();
  for (long i = 0; i < n; ++i) out.data[i] = a->value.data[i] + b->value.data[i];
  Node<S>* ap = a.get();
  Node<S>* bp = b.get();
  return make_op<S>(std::move(out), {a, b}, [ap, bp](Node<S>* self) {
    const long n = self->grad.numel();
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (long i = 0; i < n; ++i) ap->grad.data[i] += self->grad.data[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (long i = 0; i < n; ++i) bp->grad.data[i] += self->grad.data[i];
    }
  });
}

template <class S>
Ref<S> scale(Ref<S> a, double c) {
  Tens<S> out(a->value.shape);
  const long n = out.numel();
  const S cs = static_cast<S>(c);
  for (long i = 0; i < n; ++i) out.data[i] = a->value.data[i] * cs;
  Node<S>* ap = a.get();
  return make_op<S>(std::move(out), {a}, [ap, cs](Node<S>* self) {
    ap->ensure_grad();
    const long n = self->grad.numel();
    for (long i = 0; i < n; ++i) ap->grad.data[i] += cs * self->grad.data[i];
  });
}

// x [rows, D] + bias [D]
template <class S>
Ref<S> add_bias(Ref<S> x, Ref<S> bias) {
  const long d = x->value.dim(-1);
  if (bias->value.numel() != d) throw ShapeMismatch("add_bias: bias dim mismatch");
  Tens<S> out(x->value.shape);
  const long rows = x->value.rows();
  for (long r = 0; r < rows; ++r) {
    const S* xi = x->value.ptr() + r * d;
    S* oi = out.ptr() + r * d;
    for (long j = 0; j < d; ++j) oi[j] = xi[j] + bias->value.data[static_cast<std::size_t>(j)];
  }
  Node<S>* xp = x.get();
  Node<S>* bp = bias.get();
  return make_op<S>(std::move(out), {x, bias}, [xp, bp, rows, d](Node<S>* self) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      const long n = self->grad.numel();
      for (long i = 0; i < n; ++i) xp->grad.data[i] += self->grad.data[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (long r = 0; r < rows; ++r) {
        const S* gi = self->grad.ptr() + r * d;
        for (long j = 0; j < d; ++j) bp->grad.data[static_cast<std::size_t>(j)] += gi[j];
      }
    }
  });
}

// x [B,L,D] + table rows [0..L)
template <class S>
Ref<S> add_positional(Ref<S> x, Ref<S> table) {
  const long b = x->value.dim(0), l = x->value.dim(1), d = x->value.dim(2);
  if (table->value.dim(0) < l || table->value.dim(1) != d)
    throw ShapeMismatch("add_positional: table too small");
  Tens<S> out(x->value.shape);
  for (long bi = 0; bi < b; ++bi) {
    for (long li = 0; li < l; ++li) {
      const S* xi = x->value.ptr() + (bi * l + li) * d;
      const S* ti = table->value.ptr() + li * d;
      S* oi = out.ptr() + (bi * l + li) * d;
      for (long j = 0; j < d; ++j) oi[j] = xi[j] + ti[j];
    }
  }
  Node<S>* xp = x.get();
  Node<S>* tp = table.get();
  return make_op<S>(std::move(out), {x, table}, [xp, tp, b, l, d](Node<S>* self) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      const long n = self->grad.numel();
      for (long i = 0; i < n; ++i) xp->grad.data[i] += self->grad.data[i];
    }
    if (tp->requires_grad) {
      tp->ensure_grad();
      for (long bi = 0; bi < b; ++bi) {
        for (long li = 0; li < l; ++li) {
          const S* gi = self->grad.ptr() + (bi * l + li) * d;
          S* ti = tp->grad.ptr() + li * d;
          for (long j = 0; j < d; ++j) ti[j] += gi[j];
        }
      }
    }
  });
}

// h [B,L,D] + beta * delta_rows [B,D] broadcast over L; beta is a [1] node.
template <class S>
Ref<S> add_scaled_rows(Ref<S> h, Ref<S> delta, Ref<S> beta) {
  const long b = h->value.dim(0), l = h->value.dim(1), d = h->value.dim(2);
  if (delta->value.dim(0) != b || delta->value.dim(1) != d || beta->value.numel() != 1)
    throw ShapeMismatch("add_scaled_rows: shape mismatch");
  const S beta_v = beta->value.data[0];
  Tens<S> out(h->value.shape);
  for (long bi = 0; bi < b; ++bi) {
    const S* dv = delta->value.ptr() + bi * d;
    for (long li = 0; li < l; ++li) {
      const S* hi = h->value.ptr() + (bi * l + li) * d;
      S* oi = out.ptr() + (bi * l + li) * d;
      for (long j = 0; j < d; ++j) oi[j] = hi[j] + beta_v * dv[j];
    }
  }
  Node<S>* hp = h.get();
  Node<S>* dp = delta.get();
  Node<S>* bp = beta.get();
  return make_op<S>(std::move(out), {h, delta, beta},
                    [hp, dp, bp, beta_v, b, l, d](Node<S>* self) {
    if (hp->requires_grad) {
      hp->ensure_grad();
      const long n = self->grad.numel();
      for (long i = 0; i < n; ++i) hp->grad.data[i] += self->grad.data[i];
    }
    if (dp->requires_grad) {
      dp->ensure_grad();
      for (long bi = 0; bi < b; ++bi) {
        S* dg = dp->grad.ptr() + bi * d;
        for (long li = 0; li < l; ++li) {
          const S* gi = self->grad.ptr() + (bi * l + li) * d;
          for (long j = 0; j < d; ++j) dg[j] += beta_v * gi[j];
        }
      }
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      S acc = S(0);
      for (long bi = 0; bi < b; ++bi) {
        const S* dv = dp->value.ptr() + bi * d;
        for (long li = 0; li < l; ++li) {
          const S* gi = self->grad.ptr() + (bi * l + li) * d;
          for (long j = 0; j < d; ++j) acc += gi[j] * dv[j];
        }
      }
      bp->grad.data[0] += acc;
    }
  });
}

template <class S>
Ref<S> reshape(Ref<S> x, Shape shape) {
  if (Tens<S>::numel_of(shape) != x->value.numel())
    throw ShapeMismatch("reshape: element count mismatch");
  Tens<S> out(std::move(shape), x->value.data);
  Node<S>* xp = x.get();
  return make_op<S>(std::move(out), {x}, [xp](Node<S>* self) {
    xp->ensure_grad();
    const long n = self->grad.numel();
    for (long i = 0; i < n; ++i) xp->grad.data[i] += self->grad.data[i];
  });
}

// --- matmul -------------------------------------------------------------------

// x [..., K] (leading dims flattened to rows) times w [K, N].
template <class S>
Ref<S> matmul(Ref<S> x, Ref<S> w) {
  const long k = x->value.dim(-1);
  if (w->value.rank() != 2 || w->value.dim(0) != k)
    throw ShapeMismatch("matmul: inner dim mismatch");
  const long m = x->value.rows();
  const long n = w->value.dim(1);
  Shape out_shape = x->value.shape;
  out_shape.back() = n;
  Tens<S> out(out_shape);
  gemm_nn(m, n, k, x->value.ptr(), w->value.ptr(), out.ptr(), false);
  Node<S>* xp = x.get();
  Node<S>* wp = w.get();
  return make_op<S>(std::move(out), {x, w}, [xp, wp, m, n, k](Node<S>* self) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      gemm_nt(m, k, n, self->grad.ptr(), wp->value.ptr(), xp->grad.ptr(), true);
    }
    if (wp->requires_grad) {
      wp->ensure_grad();
      gemm_tn(k, n, m, xp->value.ptr(), self->grad.ptr(), wp->grad.ptr(), true);
    }
  });
}

namespace detail {

// Batched slices are independent: one parallel loop over (slice, row) pairs
// covers both the many-small-slices and few-large-slices shapes without
// nesting parallel regions.
template <class S>
void batched_gemm(char mode, long batch, long m, long n, long k, const S* a,
                  const S* b, S* c, bool accumulate) {
  const long a_sz = m * k, c_sz = m * n;
  const long b_sz = mode == 'n' ? k * n : n * k;
  const long total_rows = batch * m;
  if (total_rows * n * k > kGemmParallelWork) {
#pragma omp parallel for schedule(static)
    for (long rr = 0; rr < total_rows; ++rr) {
      const long i = rr / m, row = rr % m;
      if (mode == 'n')
        gemm_nn_rows(row, row + 1, n, k, a + i * a_sz, b + i * b_sz, c + i * c_sz,
                     accumulate);
      else
        gemm_nt_rows(row, row + 1, n, k, a + i * a_sz, b + i * b_sz, c + i * c_sz,
                     accumulate);
    }
  } else {
    for (long i = 0; i < batch; ++i) {
      if (mode == 'n')
        gemm_nn_rows<S>(0, m, n, k, a + i * a_sz, b + i * b_sz, c + i * c_sz,
                        accumulate);
      else
        gemm_nt_rows<S>(0, m, n, k, a + i * a_sz, b + i * b_sz, c + i * c_sz,
                        accumulate);
    }
  }
}

template <class S>
void batched_gemm_tn(long batch, long m, long n, long k, const S* a, const S* b,
                     S* c, bool accumulate) {
  // a is [batch, k, m], b is [batch, k, n], c is [batch, m, n]
  const long total_rows = batch * m;
  if (total_rows * n * k > kGemmParallelWork) {
#pragma omp parallel for schedule(static)
    for (long rr = 0; rr < total_rows; ++rr) {
      const long i = rr / m, row = rr % m;
      gemm_tn_rows(row, row + 1, m, n, k, a + i * k * m, b + i * k * n,
                   c + i * m * n, accumulate);
    }
  } else {
    for (long i = 0; i < batch; ++i)
      gemm_tn_rows<S>(0, m, m, n, k, a + i * k * m, b + i * k * n, c + i * m * n,
                      accumulate);
  }
}

}  // namespace detail

// a [B,M,K] @ b [B,K,N] -> [B,M,N]
template <class S>
Ref<S> bmm(Ref<S> a, Ref<S> b) {
  const long batch = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2);
  if (b->value.dim(0) != batch || b->value.dim(1) != k)
    throw ShapeMismatch("bmm: shape mismatch");
  const long n = b->value.dim(2);
  Tens<S> out({batch, m, n});
  detail::batched_gemm('n', batch, m, n, k, a->value.ptr(), b->value.ptr(),
                       out.ptr(), false);
  Node<S>* apn = a.get();
  Node<S>* bpn = b.get();
  return make_op<S>(std::move(out), {a, b}, [apn, bpn, batch, m, n, k](Node<S>* self) {
    if (apn->requires_grad) {
      apn->ensure_grad();
      // dA = G @ B^T per batch
      detail::batched_gemm('t', batch, m, k, n, self->grad.ptr(), bpn->value.ptr(),
                           apn->grad.ptr(), true);
    }
    if (bpn->requires_grad) {
      bpn->ensure_grad();
      // dB = A^T @ G per batch
      detail::batched_gemm_tn(batch, k, n, m, apn->value.ptr(), self->grad.ptr(),
                              bpn->grad.ptr(), true);
    }
  });
}

// a [B,M,K] @ b [B,N,K]^T -> [B,M,N]
template <class S>
Ref<S> bmm_nt(Ref<S> a, Ref<S> b) {
  const long batch = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2);
  if (b->value.dim(0) != batch || b->value.dim(2) != k)
    throw ShapeMismatch("bmm_nt: shape mismatch");
  const long n = b->value.dim(1);
  Tens<S> out({batch, m, n});
  detail::batched_gemm('t', batch, m, n, k, a->value.ptr(), b->value.ptr(),
                       out.ptr(), false);
  Node<S>* apn = a.get();
  Node<S>* bpn = b.get();
  return make_op<S>(std::move(out), {a, b}, [apn, bpn, batch, m, n, k](Node<S>* self) {
    if (apn->requires_grad) {
      apn->ensure_grad();
      // dA = G @ B per batch
      detail::batched_gemm('n', batch, m, k, n, self->grad.ptr(), bpn->value.ptr(),
                           apn->grad.ptr(), true);
    }
    if (bpn->requires_grad) {
      bpn->ensure_grad();
      // dB = G^T @ A per batch
      detail::batched_gemm_tn(batch, n, k, m, self->grad.ptr(), apn->value.ptr(),
                              bpn->grad.ptr(), true);
    }
  });
}

// --- head split / merge -------------------------------------------------------

// x [B,L,D] -> [B*h, L, D/h]
template <class S>
Ref<S> split_heads(Ref<S> x, long heads) {
  const long b = x->value.dim(0), l = x->value.dim(1), d = x->value.dim(2);
  if (d % heads != 0) throw ShapeMismatch("split_heads: D not divisible by heads");
  const long dk = d / heads;
  Tens<S> out({b * heads, l, dk});
  for (long bi = 0; bi < b; ++bi) {
    for (long hi = 0; hi < heads; ++hi) {
      for (long li = 0; li < l; ++li) {
        const S* src = x->value.ptr() + (bi * l + li) * d + hi * dk;
        S* dst = out.ptr() + ((bi * heads + hi) * l + li) * dk;
        for (long j = 0; j < dk; ++j) dst[j] = src[j];
      }
    }
  }
  Node<S>* xp = x.get();
  return make_op<S>(std::move(out), {x}, [xp, b, l, d, heads, dk](Node<S>* self) {
    xp->ensure_grad();
    for (long bi = 0; bi < b; ++bi) {
      for (long hi = 0; hi < heads; ++hi) {
        for (long li = 0; li < l; ++li) {
          S* dst = xp->grad.ptr() + (bi * l + li) * d + hi * dk;
          const S* src = self->grad.ptr() + ((bi * heads + hi) * l + li) * dk;
          for (long j = 0; j < dk; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

// x [B*h, L, dk] -> [B, L, h*dk]
template <class S>
Ref<S> merge_heads(Ref<S> x, long heads) {
  const long bh = x->value.dim(0), l = x->value.dim(1), dk = x->value.dim(2);
  if (bh % heads != 0) throw ShapeMismatch("merge_heads: bad batch");
  const long b = bh / heads, d = heads * dk;
  Tens<S> out({b, l, d});
  for (long bi = 0; bi < b; ++bi) {
    for (long hi = 0; hi < heads; ++hi) {
      for (long li = 0; li < l; ++li) {
        const S* src = x->value.ptr() + ((bi * heads + hi) * l + li) * dk;
        S* dst = out.ptr() + (bi * l + li) * d + hi * dk;
        for (long j = 0; j < dk; ++j) dst[j] = src[j];
      }
    }
  }
  Node<S>* xp = x.get();
  return make_op<S>(std::move(out), {x}, [xp, b, l, d, heads, dk](Node<S>* self) {
    xp->ensure_grad();
    for (long bi = 0; bi < b; ++bi) {
      for (long hi = 0; hi < heads; ++hi) {
        for (long li = 0; li < l; ++li) {
          const S* src = self->grad.ptr() + (bi * l + li) * d + hi * dk;
          S* dst = xp->grad.ptr() + ((bi * heads + hi) * l + li) * dk;
          for (long j = 0; j < dk; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

// --- softmax with masking -------------------------------------------------------

enum class MaskKind { none, causal, key };

// scores [BH, L, Skeys]; for MaskKind::key, key_mask is [B, Skeys] with 1 =
// attendable. Masked positions receive probability exactly 0 and do not
// enter the normalization; fully masked rows yield all-zero probabilities.
template <class S>
Ref<S> softmax_rows(Ref<S> scores, MaskKind kind, long heads = 1,
                    const Tens<std::uint8_t>* key_mask = nullptr) {
  const long bh = scores->value.dim(0), l = scores->value.dim(1),
             sk = scores->value.dim(2);
  if (kind == MaskKind::key) {
    if (key_mask == nullptr || key_mask->dim(0) != bh / heads ||
        key_mask->dim(1) != sk)
      throw ShapeMismatch("softmax_rows: bad key mask");
  }
  Tens<std::uint8_t> mask_copy;
  if (key_mask) mask_copy = *key_mask;

  Tens<S> out(scores->value.shape);
#pragma omp parallel for schedule(static) if (bh * l * sk > 1 << 14)
  for (long r = 0; r < bh * l; ++r) {
    const long li = r % l;
    const long b = (r / l) / heads;
    const S* in = scores->value.ptr() + r * sk;
    S* o = out.ptr() + r * sk;
    auto allowed = [&](long s) {
      if (kind == MaskKind::causal) return s <= li;
      if (kind == MaskKind::key) return mask_copy.data[static_cast<std::size_t>(b * sk + s)] != 0;
      return true;
    };
    S max_v = std::numeric_limits<S>::lowest();
    bool any = false;
    for (long s = 0; s < sk; ++s) {
      if (allowed(s)) {
        any = true;
        if (in[s] > max_v) max_v = in[s];
      }
    }
    if (!any) {
      for (long s = 0; s < sk; ++s) o[s] = S(0);
      continue;
    }
    S sum = S(0);
    for (long s = 0; s < sk; ++s) {
      if (allowed(s)) {
        o[s] = std::exp(in[s] - max_v);
        sum += o[s];
      } else {
        o[s] = S(0);
      }
    }
    const S inv = S(1) / sum;
    for (long s = 0; s < sk; ++s) o[s] *= inv;
  }

  Node<S>* sp = scores.get();
  return make_op<S>(std::move(out), {scores}, [sp, bh, l, sk](Node<S>* self) {
    sp->ensure_grad();
#pragma omp parallel for schedule(static) if (bh * l * sk > 1 << 14)
    for (long r = 0; r < bh * l; ++r) {
      const S* p = self->value.ptr() + r * sk;
      const S* g = self->grad.ptr() + r * sk;
      S dot = S(0);
      for (long s = 0; s < sk; ++s) dot += p[s] * g[s];
      S* d = sp->grad.ptr() + r * sk;
      for (long s = 0; s < sk; ++s) d[s] += p[s] * (g[s] - dot);
    }
  });
}

// --- normalization & activations -------------------------------------------------

template <class S>
Ref<S> layernorm(Ref<S> x, Ref<S> gain, Ref<S> bias, double eps = 1e-5) {
  const long d = x->value.dim(-1);
  if (gain->value.numel() != d || bias->value.numel() != d)
    throw ShapeMismatch("layernorm: affine dim mismatch");
  const long rows = x->value.rows();
  Tens<S> out(x->value.shape);
  Tens<S> xhat(x->value.shape);
  Tens<S> inv_std({rows});
#pragma omp parallel for schedule(static) if (rows * d > 1 << 14)
  for (long r = 0; r < rows; ++r) {
    const S* xi = x->value.ptr() + r * d;
    S mean = S(0);
    for (long j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (long j = 0; j < d; ++j) {
      const S c = xi[j] - mean;
      var += c * c;
    }
    var /= static_cast<S>(d);
    const S istd = S(1) / std::sqrt(var + static_cast<S>(eps));
    inv_std.data[static_cast<std::size_t>(r)] = istd;
    S* xh = xhat.ptr() + r * d;
    S* oi = out.ptr() + r * d;
    for (long j = 0; j < d; ++j) {
      xh[j] = (xi[j] - mean) * istd;
      oi[j] = xh[j] * gain->value.data[static_cast<std::size_t>(j)] +
              bias->value.data[static_cast<std::size_t>(j)];
    }
  }
  Node<S>* xp = x.get();
  Node<S>* gp = gain.get();
  Node<S>* bp = bias.get();
  return make_op<S>(
      std::move(out), {x, gain, bias},
      [xp, gp, bp, rows, d, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<S>* self) {
        // affine gradients reduce across rows: keep that pass serial, only
        // the per-row dx pass runs in parallel
        if (gp->requires_grad || bp->requires_grad) {
          if (gp->requires_grad) gp->ensure_grad();
          if (bp->requires_grad) bp->ensure_grad();
          for (long r = 0; r < rows; ++r) {
            const S* g = self->grad.ptr() + r * d;
            const S* xh = xhat.ptr() + r * d;
            for (long j = 0; j < d; ++j) {
              if (gp->requires_grad)
                gp->grad.data[static_cast<std::size_t>(j)] += g[j] * xh[j];
              if (bp->requires_grad) bp->grad.data[static_cast<std::size_t>(j)] += g[j];
            }
          }
        }
        if (xp->requires_grad) {
          xp->ensure_grad();
#pragma omp parallel for schedule(static) if (rows * d > 1 << 14)
          for (long r = 0; r < rows; ++r) {
            const S* g = self->grad.ptr() + r * d;
            const S* xh = xhat.ptr() + r * d;
            S mean_gh = S(0), mean_ghx = S(0);
            for (long j = 0; j < d; ++j) {
              const S gh = g[j] * gp->value.data[static_cast<std::size_t>(j)];
              mean_gh += gh;
              mean_ghx += gh * xh[j];
            }
            mean_gh /= static_cast<S>(d);
            mean_ghx /= static_cast<S>(d);
            const S istd = inv_std.data[static_cast<std::size_t>(r)];
            S* dx = xp->grad.ptr() + r * d;
            for (long j = 0; j < d; ++j) {
              const S gh = g[j] * gp->value.data[static_cast<std::size_t>(j)];
              dx[j] += istd * (gh - mean_gh - xh[j] * mean_ghx);
            }
          }
        }
      });
}

template <class S>
Ref<S> gelu(Ref<S> x) {
  const long n = x->value.numel();
  Tens<S> out(x->value.shape);
#pragma omp parallel for schedule(static) if (n > 1 << 14)
  for (long i = 0; i < n; ++i) {
    const S v = x->value.data[i];
    out.data[i] = S(0.5) * v * (S(1) + std::erf(v / S(std::sqrt(2.0))));
  }
  Node<S>* xp = x.get();
  return make_op<S>(std::move(out), {x}, [xp, n](Node<S>* self) {
    xp->ensure_grad();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
#pragma omp parallel for schedule(static) if (n > 1 << 14)
    for (long i = 0; i < n; ++i) {
      const S v = xp->value.data[i];
      const S cdf = S(0.5) * (S(1) + std::erf(v * S(inv_sqrt2)));
      const S pdf = S(inv_sqrt2pi) * std::exp(S(-0.5) * v * v);
      xp->grad.data[i] += self->grad.data[i] * (cdf + v * pdf);
    }
  });
}

template <class S>
Ref<S> sigmoid(Ref<S> x) {
  const long n = x->value.numel();
  Tens<S> out(x->value.shape);
  for (long i = 0; i < n; ++i) {
    const S v = x->value.data[i];
    out.data[i] = v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                            : std::exp(v) / (S(1) + std::exp(v));
  }
  Node<S>* xp = x.get();
  return make_op<S>(std::move(out), {x}, [xp, n](Node<S>* self) {
    xp->ensure_grad();
    for (long i = 0; i < n; ++i) {
      const S y = self->value.data[i];
      xp->grad.data[i] += self->grad.data[i] * y * (S(1) - y);
    }
  });
}

// --- gather / pooling / concat ----------------------------------------------------

// table [V,D] gathered by ids -> [B,L,D]
template <class S>
Ref<S> embedding(Ref<S> table, const std::vector<int>& ids, long b, long l) {
  const long v = table->value.dim(0), d = table->value.dim(1);
  if (static_cast<long>(ids.size()) != b * l)
    throw ShapeMismatch("embedding: ids size mismatch");
  Tens<S> out({b, l, d});
  for (long i = 0; i < b * l; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= v) throw ShapeMismatch("embedding: id out of range");
    const S* src = table->value.ptr() + static_cast<long>(id) * d;
    S* dst = out.ptr() + i * d;
    for (long j = 0; j < d; ++j) dst[j] = src[j];
  }
  Node<S>* tp = table.get();
  return make_op<S>(std::move(out), {table}, [tp, ids, b, l, d](Node<S>* self) {
    tp->ensure_grad();
    for (long i = 0; i < b * l; ++i) {
      const int id = ids[static_cast<std::size_t>(i)];
      S* dst = tp->grad.ptr() + static_cast<long>(id) * d;
      const S* src = self->grad.ptr() + i * d;
      for (long j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

// x [B,L,D], mask [B,L] -> mean over unmasked rows [B,D].
// Throws AllPadded when a batch row has no unmasked position.
template <class S>
Ref<S> masked_mean(Ref<S> x, const Tens<std::uint8_t>& mask) {
  const long b = x->value.dim(0), l = x->value.dim(1), d = x->value.dim(2);
  if (mask.dim(0) != b || mask.dim(1) != l)
    throw ShapeMismatch("masked_mean: mask shape mismatch");
  Tens<S> out({b, d});
  std::vector<long> counts(static_cast<std::size_t>(b), 0);
  for (long bi = 0; bi < b; ++bi) {
    S* o = out.ptr() + bi * d;
    long count = 0;
    for (long li = 0; li < l; ++li) {
      if (!mask.data[static_cast<std::size_t>(bi * l + li)]) continue;
      ++count;
      const S* xi = x->value.ptr() + (bi * l + li) * d;
      for (long j = 0; j < d; ++j) o[j] += xi[j];
    }
    if (count == 0) throw AllPadded("masked_mean: a sequence has no valid positions");
    counts[static_cast<std::size_t>(bi)] = count;
    const S inv = S(1) / static_cast<S>(count);
    for (long j = 0; j < d; ++j) o[j] *= inv;
  }
  Node<S>* xp = x.get();
  Tens<std::uint8_t> mask_copy = mask;
  return make_op<S>(std::move(out), {x},
                    [xp, mask_copy = std::move(mask_copy), counts, b, l, d](Node<S>* self) {
    xp->ensure_grad();
    for (long bi = 0; bi < b; ++bi) {
      const S inv = S(1) / static_cast<S>(counts[static_cast<std::size_t>(bi)]);
      const S* g = self->grad.ptr() + bi * d;
      for (long li = 0; li < l; ++li) {
        if (!mask_copy.data[static_cast<std::size_t>(bi * l + li)]) continue;
        S* dst = xp->grad.ptr() + (bi * l + li) * d;
        for (long j = 0; j < d; ++j) dst[j] += g[j] * inv;
      }
    }
  });
}

// rows [B,D] -> [B,L,D] repeated
template <class S>
Ref<S> broadcast_rows(Ref<S> x, long l) {
  const long b = x->value.dim(0), d = x->value.dim(1);
  Tens<S> out({b, l, d});
  for (long bi = 0; bi < b; ++bi) {
    const S* src = x->value.ptr() + bi * d;
    for (long li = 0; li < l; ++li) {
      S* dst = out.ptr() + (bi * l + li) * d;
      for (long j = 0; j < d; ++j) dst[j] = src[j];
    }
  }
  Node<S>* xp = x.get();
  return make_op<S>(std::move(out), {x}, [xp, b, l, d](Node<S>* self) {
    xp->ensure_grad();
    for (long bi = 0; bi < b; ++bi) {
      S* dst = xp->grad.ptr() + bi * d;
      for (long li = 0; li < l; ++li) {
        const S* src = self->grad.ptr() + (bi * l + li) * d;
        for (long j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
  });
}

// concatenate [B,Ti,D] blocks along the token dimension
template <class S>
Ref<S> concat_tokens(std::vector<Ref<S>> blocks) {
  if (blocks.empty()) throw ShapeMismatch("concat_tokens: no blocks");
  const long b = blocks[0]->value.dim(0), d = blocks[0]->value.dim(2);
  long total = 0;
  for (const auto& blk : blocks) {
    if (blk->value.dim(0) != b || blk->value.dim(2) != d)
      throw ShapeMismatch("concat_tokens: block shape mismatch");
    total += blk->value.dim(1);
  }
  Tens<S> out({b, total, d});
  long offset = 0;
  for (const auto& blk : blocks) {
    const long t = blk->value.dim(1);
    for (long bi = 0; bi < b; ++bi) {
      const S* src = blk->value.ptr() + bi * t * d;
      S* dst = out.ptr() + (bi * total + offset) * d;
      for (long i = 0; i < t * d; ++i) dst[i] = src[i];
    }
    offset += t;
  }
  std::vector<Node<S>*> raw;
  std::vector<long> sizes;
  for (const auto& blk : blocks) {
    raw.push_back(blk.get());
    sizes.push_back(blk->value.dim(1));
  }
  return make_op<S>(std::move(out), std::move(blocks),
                    [raw, sizes, b, total, d](Node<S>* self) {
    long offset = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const long t = sizes[i];
      if (raw[i]->requires_grad) {
        raw[i]->ensure_grad();
        for (long bi = 0; bi < b; ++bi) {
          S* dst = raw[i]->grad.ptr() + bi * t * d;
          const S* src = self->grad.ptr() + (bi * total + offset) * d;
          for (long j = 0; j < t * d; ++j) dst[j] += src[j];
        }
      }
      offset += t;
    }
  });
}

// --- losses --------------------------------------------------------------------

// logits [B,L,V], targets/valid flattened B*L. Mean token cross-entropy over
// valid positions.
template <class S>
Ref<S> cross_entropy_mean(Ref<S> logits, const std::vector<int>& targets,
                          const std::vector<std::uint8_t>& valid) {
  const long rows = logits->value.rows();
  const long v = logits->value.dim(-1);
  if (static_cast<long>(targets.size()) != rows ||
      static_cast<long>(valid.size()) != rows)
    throw ShapeMismatch("cross_entropy_mean: target size mismatch");

  long n_valid = 0;
  for (auto f : valid) n_valid += f ? 1 : 0;
  if (n_valid == 0) throw AllPadded("cross_entropy_mean: no valid targets");

  Tens<S> probs(logits->value.shape);
  S total = S(0);
  for (long r = 0; r < rows; ++r) {
    if (!valid[static_cast<std::size_t>(r)]) continue;
    const S* in = logits->value.ptr() + r * v;
    S* p = probs.ptr() + r * v;
    S max_v = in[0];
    for (long j = 1; j < v; ++j) max_v = std::max(max_v, in[j]);
    S sum = S(0);
    for (long j = 0; j < v; ++j) {
      p[j] = std::exp(in[j] - max_v);
      sum += p[j];
    }
    const S inv = S(1) / sum;
    for (long j = 0; j < v; ++j) p[j] *= inv;
    total -= std::log(p[targets[static_cast<std::size_t>(r)]]);
  }
  Tens<S> out({1});
  out.data[0] = total / static_cast<S>(n_valid);

  Node<S>* lp = logits.get();
  return make_op<S>(std::move(out), {logits},
                    [lp, targets, valid, probs = std::move(probs), rows, v,
                     n_valid](Node<S>* self) {
    lp->ensure_grad();
    const S g = self->grad.data[0] / static_cast<S>(n_valid);
    for (long r = 0; r < rows; ++r) {
      if (!valid[static_cast<std::size_t>(r)]) continue;
      const S* p = probs.ptr() + r * v;
      S* d = lp->grad.ptr() + r * v;
      const int t = targets[static_cast<std::size_t>(r)];
      for (long j = 0; j < v; ++j) d[j] += g * (p[j] - (j == t ? S(1) : S(0)));
    }
  });
}

// logits [B,K], targets [B,K] in {0,1}. Mean binary cross-entropy.
template <class S>
Ref<S> bce_with_logits_mean(Ref<S> logits, const Tens<S>& targets) {
  if (logits->value.shape != targets.shape)
    throw ShapeMismatch("bce_with_logits_mean: shape mismatch");
  const long n = logits->value.numel();
  S total = S(0);
  for (long i = 0; i < n; ++i) {
    const S s = logits->value.data[i];
    const S t = targets.data[i];
    total += std::max(s, S(0)) - s * t + std::log1p(std::exp(-std::abs(s)));
  }
  Tens<S> out({1});
  out.data[0] = total / static_cast<S>(n);
  Node<S>* lp = logits.get();
  Tens<S> targets_copy = targets;
  return make_op<S>(std::move(out), {logits},
                    [lp, targets_copy = std::move(targets_copy), n](Node<S>* self) {
    lp->ensure_grad();
    const S g = self->grad.data[0] / static_cast<S>(n);
    for (long i = 0; i < n; ++i) {
      const S s = lp->value.data[i];
      const S sig = s >= S(0) ? S(1) / (S(1) + std::exp(-s))
                              : std::exp(s) / (S(1) + std::exp(s));
      lp->grad.data[i] += g * (sig - targets_copy.data[i]);
    }
  });
}

}  // namespace bfmd::nn
