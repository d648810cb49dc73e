#include "umit/gradcheck_suite.hpp"

#include <functional>

#include "umit/gradcheck.hpp"
#include "umit/losses.hpp"
#include "umit/ops.hpp"
#include "umit/rng.hpp"
#include "umit/tensor.hpp"

namespace umit {

namespace {

constexpr double kTol = 1e-4;
constexpr double kTol2 = 1e-3;

struct Suite {
  uint64_t seed;
  double fault;
  const std::string& only;
  std::vector<GradOutcome> out;

  TensorD rnd(Shape s, const char* name, double stddev = 1.0) {
    Rng r = stream(seed, name);
    return randn<double>(s, r, stddev);
  }

  // fixed random projection so every output coordinate's adjoint is exercised
  TensorD proj(const TensorD& y, const char* name) {
    Rng r = stream(seed, name);
    TensorD R = randn<double>(y.shape(), r);
    return sum(mul(y, R));
  }

  void check(const std::string& name, TensorD& x, const std::function<TensorD()>& f,
             double tol = kTol, double eps = 1e-5) {
    if (!only.empty() && name.find(only) == std::string::npos) return;
    double err = finite_diff_check<double>(f, x, eps, fault);
    out.push_back({name, err, tol, err < tol});
  }
};

}  // namespace

std::vector<GradOutcome> run_gradchecks(uint64_t seed, double fault, const std::string& only) {
  Suite s{seed, fault, only, {}};

  // convolution family
  {
    TensorD x = s.rnd(Shape{2, 3, 6, 6}, "cv_x");
    TensorD w = s.rnd(Shape{4, 3, 3, 3}, "cv_w", 0.3);
    TensorD b = s.rnd(Shape{4}, "cv_b", 0.3);
    s.check("conv2d_x", x, [&] { return s.proj(conv2d(x, w, b, 1, 1), "cv_p"); });
    s.check("conv2d_w", w, [&] { return s.proj(conv2d(x, w, b, 1, 1), "cv_p"); });
    s.check("conv2d_bias", b, [&] { return s.proj(conv2d(x, w, b, 1, 1), "cv_p"); });
    TensorD w4 = s.rnd(Shape{4, 3, 4, 4}, "cv_w4", 0.3);
    s.check("conv2d_s2_x", x, [&] { return s.proj(conv2d(x, w4, b, 2, 1), "cv_p2"); });
    s.check("conv2d_s2_w", w4, [&] { return s.proj(conv2d(x, w4, b, 2, 1), "cv_p2"); });
    s.check("conv2d_s2_dil2_x", x,
            [&] { return s.proj(conv2d(x, w4, b, 2, 3, 2), "cv_p3"); });
    s.check("conv2d_s2_dil2_w", w4,
            [&] { return s.proj(conv2d(x, w4, b, 2, 3, 2), "cv_p3"); });
  }
  {
    TensorD x = s.rnd(Shape{2, 3, 3, 3}, "tc_x");
    TensorD w = s.rnd(Shape{3, 4, 4, 4}, "tc_w", 0.3);
    TensorD b = s.rnd(Shape{4}, "tc_b", 0.3);
    s.check("tconv2d_x", x,
            [&] { return s.proj(transposed_conv2d(x, w, b, 2, 1), "tc_p"); });
    s.check("tconv2d_w", w,
            [&] { return s.proj(transposed_conv2d(x, w, b, 2, 1), "tc_p"); });
    s.check("tconv2d_bias", b,
            [&] { return s.proj(transposed_conv2d(x, w, b, 2, 1), "tc_p"); });
  }

  // normalization and activations
  {
    TensorD x = s.rnd(Shape{2, 3, 5, 5}, "in_x");
    TensorD g = s.rnd(Shape{3}, "in_g", 0.5);
    TensorD b = s.rnd(Shape{3}, "in_b", 0.5);
    s.check("instance_norm_x", x,
            [&] { return s.proj(instance_norm(x, g, b), "in_p"); });
    s.check("instance_norm_gamma", g,
            [&] { return s.proj(instance_norm(x, g, b), "in_p"); });
    s.check("instance_norm_beta", b,
            [&] { return s.proj(instance_norm(x, g, b), "in_p"); });
  }
  {
    TensorD x = s.rnd(Shape{2, 3, 4, 4}, "ac_x");
    nudge_from_kinks(x, 1e-3);
    s.check("activation_relu", x,
            [&] { return s.proj(activation(x, Act::Relu), "ac_p"); });
    s.check("activation_leaky_relu", x,
            [&] { return s.proj(activation(x, Act::LeakyRelu), "ac_p"); });
    s.check("activation_tanh", x,
            [&] { return s.proj(activation(x, Act::Tanh), "ac_p"); });
    s.check("activation_linear", x,
            [&] { return s.proj(activation(x, Act::Linear), "ac_p"); });
  }

  // dense algebra
  {
    TensorD x = s.rnd(Shape{3, 5}, "fc_x");
    TensorD w = s.rnd(Shape{5, 4}, "fc_w", 0.5);
    TensorD b = s.rnd(Shape{4}, "fc_b", 0.5);
    s.check("fully_connected_x", x,
            [&] { return s.proj(fully_connected(x, w, b), "fc_p"); });
    s.check("fully_connected_w", w,
            [&] { return s.proj(fully_connected(x, w, b), "fc_p"); });
    s.check("fully_connected_bias", b,
            [&] { return s.proj(fully_connected(x, w, b), "fc_p"); });
    TensorD a = s.rnd(Shape{3, 4}, "mm_a");
    TensorD m = s.rnd(Shape{4, 2}, "mm_b");
    s.check("matmul_a", a, [&] { return s.proj(matmul(a, m), "mm_p"); });
    s.check("matmul_b", m, [&] { return s.proj(matmul(a, m), "mm_p"); });
    s.check("transpose2", a, [&] { return s.proj(transpose2(a), "tr_p"); });
  }

  // channel plumbing
  {
    TensorD a = s.rnd(Shape{2, 2, 4, 4}, "cc_a");
    TensorD b = s.rnd(Shape{2, 3, 4, 4}, "cc_b");
    auto f = [&] { return s.proj(concat_channels<double>({a, b}), "cc_p"); };
    s.check("concat_channels_a", a, f);
    s.check("concat_channels_b", b, f);
    TensorD x = s.rnd(Shape{2, 5, 4, 4}, "sl_x");
    s.check("slice_channels", x,
            [&] { return s.proj(slice_channels(x, 1, 4), "sl_p"); });
    s.check("pad_channels", a, [&] { return s.proj(pad_channels(a, 1, 5), "pd_p"); });
    TensorD ps = s.rnd(Shape{2, 2, 3, 3}, "ps_x");
    std::vector<int> slots{0, 2};
    s.check("place_slots", ps,
            [&] { return s.proj(place_slots(ps, slots, 3), "ps_p"); });
    TensorD ss = s.rnd(Shape{2, 6, 3, 3}, "ss_x");
    std::vector<int> picks{1, 0};
    s.check("select_slots", ss,
            [&] { return s.proj(select_slots(ss, picks, 3), "ss_p"); });
  }

  // statistics heads
  {
    TensorD x = s.rnd(Shape{2, 3, 4, 4}, "gm_x");
    s.check("gram_matrix", x, [&] { return s.proj(gram_matrix(x), "gm_p"); });
    TensorD lg = s.rnd(Shape{4, 3}, "ce_x");
    std::vector<int> labels{0, 1, 2, 0};
    s.check("softmax_cross_entropy", lg,
            [&] { return softmax_cross_entropy(lg, labels); });
  }

  // reductions
  {
    TensorD x = s.rnd(Shape{3, 4}, "rd_x");
    s.check("reduce_mean", x, [&] { return reduce(x, Reduce::Mean); });
    s.check("reduce_sum", x, [&] { return reduce(x, Reduce::Sum); });
    TensorD xl = s.rnd(Shape{3, 4}, "rd_l");
    nudge_from_kinks(xl, 1e-3);
    s.check("reduce_l1mean", xl, [&] { return reduce(xl, Reduce::L1Mean); });
    s.check("reduce_l2norm", x, [&] { return reduce(x, Reduce::L2Norm); });
    s.check("row_sum", x, [&] { return s.proj(row_sum(x), "rs_p"); });
    s.check("col_sum", x, [&] { return s.proj(col_sum(x), "cs_p"); });
    TensorD v = s.rnd(Shape{3}, "br_x");
    s.check("broadcast_row", v, [&] { return s.proj(broadcast_row(v, 4), "br_p"); });
    TensorD c4 = s.rnd(Shape{2, 3, 4, 4}, "ch_x");
    s.check("channel_sum", c4, [&] { return s.proj(channel_sum(c4), "ch_p"); });
    s.check("avg_pool2", c4, [&] { return s.proj(avg_pool2(c4), "ap_p"); });
    s.check("global_avg_pool", c4,
            [&] { return s.proj(global_avg_pool(c4), "gp_p"); });
  }

  // elementwise and scalar plumbing
  {
    TensorD a = s.rnd(Shape{2, 5}, "ew_a");
    TensorD b = s.rnd(Shape{2, 5}, "ew_b");
    auto fa = [&] { return s.proj(add(a, b), "ew_p"); };
    s.check("add_a", a, fa);
    s.check("add_b", b, fa);
    s.check("sub_a", a, [&] { return s.proj(sub(a, b), "ew_p"); });
    s.check("sub_b", b, [&] { return s.proj(sub(a, b), "ew_p"); });
    auto fm = [&] { return s.proj(mul(a, b), "ew_p"); };
    s.check("mul_a", a, fm);
    s.check("mul_b", b, fm);
    s.check("neg", a, [&] { return s.proj(neg(a), "ew_p"); });
    s.check("scalar_mul", a, [&] { return s.proj(scalar_mul(a, 1.7), "ew_p"); });
    s.check("scalar_add", a, [&] { return s.proj(scalar_add(a, -0.4), "ew_p"); });
    s.check("square", a, [&] { return s.proj(square(a), "ew_p"); });
    TensorD na = s.rnd(Shape{2, 5}, "ew_n");
    nudge_from_kinks(na, 1e-3);
    s.check("abs", na, [&] { return s.proj(abs(na), "ew_p"); });
    TensorD pos = scalar_add(abs(s.rnd(Shape{2, 5}, "ew_q")), 0.5);
    s.check("reciprocal", pos, [&] { return s.proj(reciprocal(pos), "ew_p"); });
    s.check("sqrt_eps", pos,
            [&] { return s.proj(sqrt_eps(pos, 1e-8), "ew_p"); });
    s.check("sum", a, [&] { return sum(a); });
    s.check("mean", a, [&] { return mean(a); });
    s.check("reshape", a, [&] { return s.proj(reshape(a, Shape{5, 2}), "rsh_p"); });
    TensorD sc = s.rnd(Shape{1}, "sc_x");
    s.check("broadcast_scalar", sc,
            [&] { return s.proj(broadcast_scalar(sc, Shape{2, 3}), "bs_p"); });
    s.check("scale_by_x", a, [&] { return s.proj(scale_by(a, sc), "sb_p"); });
    s.check("scale_by_s", sc, [&] { return s.proj(scale_by(a, sc), "sb_p"); });
    TensorD rb = s.rnd(Shape{4}, "rb_x");
    TensorD rx = s.rnd(Shape{3, 4}, "rb_y");
    s.check("add_row_bias_x", rx, [&] { return s.proj(add_row_bias(rx, rb), "rb_p"); });
    s.check("add_row_bias_b", rb, [&] { return s.proj(add_row_bias(rx, rb), "rb_p"); });
    TensorD cb = s.rnd(Shape{3}, "cb_x");
    TensorD cx = s.rnd(Shape{2, 3, 3, 3}, "cb_y");
    s.check("add_channel_bias_x", cx,
            [&] { return s.proj(add_channel_bias(cx, cb), "cb_p"); });
    s.check("add_channel_bias_b", cb,
            [&] { return s.proj(add_channel_bias(cx, cb), "cb_p"); });
    TensorD la = s.rnd(Shape{3, 2, 2, 2}, "lr_a");
    TensorD lb = s.rnd(Shape{3, 2, 2, 2}, "lr_b");
    std::vector<double> t{0.3, 0.6, 0.9};
    s.check("lerp_rows_a", la, [&] { return s.proj(lerp_rows(la, lb, t), "lr_p"); });
    s.check("lerp_rows_b", lb, [&] { return s.proj(lerp_rows(la, lb, t), "lr_p"); });
  }

  // compositions: several ops chained, gradients taken at the far end
  {
    TensorD x = s.rnd(Shape{2, 3, 6, 6}, "c1_x");
    TensorD w1 = s.rnd(Shape{4, 3, 4, 4}, "c1_w1", 0.3);
    TensorD b1 = s.rnd(Shape{4}, "c1_b1", 0.3);
    TensorD g = s.rnd(Shape{4}, "c1_g", 0.5);
    TensorD bt = s.rnd(Shape{4}, "c1_bt", 0.5);
    TensorD w2 = s.rnd(Shape{4, 3, 4, 4}, "c1_w2", 0.3);
    TensorD b2 = s.rnd(Shape{3}, "c1_b2", 0.3);
    auto f1 = [&] {
      auto h = activation(instance_norm(conv2d(x, w1, b1, 2, 1), g, bt), Act::Tanh);
      return s.proj(transposed_conv2d(h, w2, b2, 2, 1), "c1_p");
    };
    s.check("compose_encode_decode_x", x, f1);
    s.check("compose_encode_decode_w", w1, f1);

    TensorD cw = s.rnd(Shape{4, 3, 4, 4}, "c2_w", 0.3);
    TensorD cb = s.rnd(Shape{4}, "c2_b", 0.3);
    TensorD fw = s.rnd(Shape{4 * 3 * 3, 5}, "c2_fw", 0.3);
    TensorD fb = s.rnd(Shape{5}, "c2_fb", 0.3);
    auto f2 = [&] {
      auto h = activation(conv2d(x, cw, cb, 2, 1), Act::Tanh);
      auto flat = reshape(h, Shape{2, 4 * 3 * 3});
      return mean(fully_connected(flat, fw, fb));
    };
    s.check("compose_critic_head_w", cw, f2);

    TensorD sw = s.rnd(Shape{4, 3, 3, 3}, "c3_w", 0.3);
    TensorD sb = s.rnd(Shape{4}, "c3_b", 0.3);
    Rng tr = stream(s.seed, "c3_t");
    TensorD target = randn<double>(Shape{2, 4, 4}, tr);
    auto f3 = [&] {
      auto gm = gram_matrix(activation(conv2d(x, sw, sb, 1, 1), Act::Tanh));
      return reduce(sub(gm, target), Reduce::L2Norm);
    };
    s.check("compose_style_distance_x", x, f3);
  }

  // second order: the penalty's own gradient w.r.t. critic parameters
  {
    TensorD w1 = s.rnd(Shape{6, 5}, "so_w1", 0.4);
    TensorD b1 = s.rnd(Shape{5}, "so_b1", 0.2);
    TensorD w2 = s.rnd(Shape{5, 1}, "so_w2", 0.4);
    TensorD b2 = s.rnd(Shape{1}, "so_b2", 0.2);
    TensorD real = s.rnd(Shape{3, 6}, "so_real");
    TensorD fake = s.rnd(Shape{3, 6}, "so_fake");
    auto penalty = [&] {
      auto critic = [&](const TensorD& v) {
        return fully_connected(activation(fully_connected(v, w1, b1), Act::Tanh), w2, b2);
      };
      Rng r = stream(s.seed, "so_t");
      return gradient_penalty<double>(critic, real, fake, r);
    };
    s.check("second_order_penalty_w1", w1, penalty, kTol2, 1e-4);
    s.check("second_order_penalty_w2", w2, penalty, kTol2, 1e-4);
    s.check("second_order_penalty_b1", b1, penalty, kTol2, 1e-4);
  }

  return s.out;
}

}  // namespace umit
