#include <doctest.h>

#include <cmath>

#include "imaginet/errors.hpp"
#include "imaginet/layers.hpp"
#include "imaginet/rng.hpp"
#include "oracles.hpp"

using namespace imaginet;

namespace {

GruParams random_gru(std::size_t in, std::size_t hidden, Rng& rng, double scale = 0.6) {
  GruParams p = GruParams::zeros(in, hidden);
  for (Matrix* m : {&p.Wz, &p.Uz, &p.Wr, &p.Ur, &p.W, &p.U})
    for (double& x : m->span()) x = rng.uniform(-scale, scale);
  return p;
}

Vector random_vector(std::size_t n, Rng& rng, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Distance of every candidate pre-activation to the rectifier kinks.
double kink_distance(const GruParams& p, std::span<const GruStepTrace> traces) {
  double d = 1e300;
  for (const GruStepTrace& t : traces) {
    Vector gated(t.h_prev.dim());
    for (std::size_t i = 0; i < gated.dim(); ++i) gated[i] = t.r[i] * t.h_prev[i];
    Vector pre = matvec(p.W, t.x.span());
    matvec_add(p.U, gated.span(), pre.span());
    for (double z : pre) d = std::min({d, std::abs(z), std::abs(z - 5.0)});
  }
  return d;
}

}  // namespace

TEST_CASE("steep sigmoid") {
  CHECK(steep_sigmoid(0.0) == 0.5);
  CHECK(steep_sigmoid(1.0) == doctest::Approx(0.97702263008997439).epsilon(1e-14));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double z = rng.uniform(-20, 20);
    CHECK(steep_sigmoid(z) + steep_sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(steep_sigmoid(-400.0) >= 0.0);
  CHECK(std::isfinite(steep_sigmoid(-1e6)));
  CHECK(std::isfinite(steep_sigmoid(1e6)));
}

TEST_CASE("steep sigmoid is strictly monotone") {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform(-8, 8);
    const double b = a + rng.uniform(1e-6, 1.0);
    CHECK(steep_sigmoid(a) < steep_sigmoid(b));
  }
}

TEST_CASE("clipped rectifier") {
  CHECK(clipped_relu(-2.0) == 0.0);
  CHECK(clipped_relu(3.0) == 3.0);
  CHECK(clipped_relu(7.0) == 5.0);
  CHECK(clipped_relu_grad_from_output(0.0, 0.0, 5.0) == 0.0);
  CHECK(clipped_relu_grad_from_output(5.0, 0.0, 5.0) == 0.0);
  CHECK(clipped_relu_grad_from_output(2.5, 0.0, 5.0) == 1.0);
}

TEST_CASE("activation config validation") {
  CHECK_NOTHROW(ActivationConfig{}.validate());
  CHECK_THROWS_AS((ActivationConfig{3.75, 5.0, 5.0}.validate()), ConfigError);
  CHECK_THROWS_AS((ActivationConfig{0.0, 0.0, 5.0}.validate()), ConfigError);
}

TEST_CASE("gru step with zero weights") {
  const GruParams p = GruParams::zeros(3, 2);
  const GruStepTrace t = gru_step(p, Vector{1, 1}, Vector{0.3, -0.2, 0.9});
  CHECK(t.z == Vector{0.5, 0.5});
  CHECK(t.r == Vector{0.5, 0.5});
  CHECK(t.h_cand == Vector{0, 0});
  CHECK(t.h == Vector{0.5, 0.5});
}

TEST_CASE("gru step gate extremes") {
  GruParams p = GruParams::zeros(1, 2);
  p.W = Matrix{{2.0}, {1.0}};
  const Vector h_prev{1.5, 0.5};
  const Vector x{1.0};

  p.Wz = Matrix{{-50.0}, {-50.0}};
  const GruStepTrace closed = gru_step(p, h_prev, x);
  CHECK(closed.h[0] == doctest::Approx(h_prev[0]).epsilon(1e-12));
  CHECK(closed.h[1] == doctest::Approx(h_prev[1]).epsilon(1e-12));

  p.Wz = Matrix{{50.0}, {50.0}};
  const GruStepTrace open = gru_step(p, h_prev, x);
  CHECK(open.h[0] == doctest::Approx(open.h_cand[0]).epsilon(1e-12));
  CHECK(open.h[1] == doctest::Approx(open.h_cand[1]).epsilon(1e-12));
}

TEST_CASE("gru state stays in the rectifier range") {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const GruParams p = random_gru(4, 6, rng, 3.0);
    const Vector h_prev = random_vector(6, rng, 0.0, 5.0);
    const Vector x = random_vector(4, rng, -5.0, 5.0);
    const GruStepTrace t = gru_step(p, h_prev, x);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(t.z[i] >= 0.0);
      CHECK(t.z[i] <= 1.0);
      CHECK(t.h[i] >= 0.0);
      CHECK(t.h[i] <= 5.0);
      CHECK(t.h_cand[i] >= 0.0);
      CHECK(t.h_cand[i] <= 5.0);
    }
  }
}

TEST_CASE("gru step rejects bad shapes") {
  const GruParams p = GruParams::zeros(3, 2);
  CHECK_THROWS_AS(gru_step(p, Vector(2), Vector(4)), ShapeError);
  CHECK_THROWS_AS(gru_step(p, Vector(3), Vector(3)), ShapeError);
}

TEST_CASE("gru backward matches extended-precision finite differences") {
  Rng rng(17);
  int checked = 0;
  while (checked < 25) {
    const GruParams p = random_gru(5, 7, rng);
    std::vector<Vector> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(random_vector(5, rng, -1.0, 1.0));
    const auto traces = gru_sequence(p, xs);
    if (kink_distance(p, traces) < 1e-3) continue;
    ++checked;

    // Loss: sum over steps of c_t · h_t.
    std::vector<Vector> c;
    for (int t = 0; t < 3; ++t) c.push_back(random_vector(7, rng, -1.0, 1.0));
    const GruGradients g = gru_backward(traces, p, c);

    std::vector<oracle::LVec> lxs;
    for (const Vector& x : xs) lxs.emplace_back(x.begin(), x.end());
    GruParams probe = p;
    const auto loss = [&]() {
      const auto run = oracle::run_gru(probe, lxs);
      oracle::LD s = 0;
      for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < 7; ++i) s += c[t][i] * run.states[t][i];
      return s;
    };
    const std::pair<Matrix*, const Matrix*> pairs[] = {
        {&probe.Wz, &g.params.Wz}, {&probe.Uz, &g.params.Uz}, {&probe.Wr, &g.params.Wr},
        {&probe.Ur, &g.params.Ur}, {&probe.W, &g.params.W},   {&probe.U, &g.params.U}};
    const double eps = 1e-5;
    for (const auto& [param, grad] : pairs) {
      for (std::size_t i = 0; i < param->size(); ++i) {
        const double saved = param->span()[i];
        param->span()[i] = saved + eps;
        const auto up = loss();
        param->span()[i] = saved - eps;
        const auto down = loss();
        param->span()[i] = saved;
        const double numeric = static_cast<double>((up - down) / (2.0L * eps));
        const double a = grad->span()[i];
        CHECK(std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8}) < 1e-4);
      }
    }
    // Input gradients.
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t i = 0; i < 5; ++i) {
        const auto saved = lxs[t][i];
        lxs[t][i] = saved + eps;
        const auto up = loss();
        lxs[t][i] = saved - eps;
        const auto down = loss();
        lxs[t][i] = saved;
        const double numeric = static_cast<double>((up - down) / (2.0L * eps));
        CHECK(g.inputs[t][i] == doctest::Approx(numeric).epsilon(1e-4).scale(1e-8));
      }
  }
}

TEST_CASE("gru backward is linear in the upstream gradient") {
  Rng rng(5);
  const GruParams p = random_gru(3, 4, rng);
  std::vector<Vector> xs{random_vector(3, rng, -1, 1), random_vector(3, rng, -1, 1)};
  const auto traces = gru_sequence(p, xs);

  const GruGradients zero = gru_backward(traces, p, std::vector<Vector>(2, Vector(4)));
  for (const Matrix* m : {&zero.params.Wz, &zero.params.Uz, &zero.params.Wr, &zero.params.Ur,
                          &zero.params.W, &zero.params.U})
    for (double x : m->span()) CHECK(x == 0.0);

  std::vector<Vector> c{random_vector(4, rng, -1, 1), random_vector(4, rng, -1, 1)};
  std::vector<Vector> c2 = c;
  for (Vector& v : c2)
    for (double& x : v) x *= 2.0;
  const GruGradients g1 = gru_backward(traces, p, c);
  const GruGradients g2 = gru_backward(traces, p, c2);
  const Matrix* a[] = {&g1.params.Wz, &g1.params.Uz, &g1.params.Wr, &g1.params.Ur, &g1.params.W, &g1.params.U};
  const Matrix* b[] = {&g2.params.Wz, &g2.params.Uz, &g2.params.Wr, &g2.params.Ur, &g2.params.W, &g2.params.U};
  for (int k = 0; k < 6; ++k)
    for (std::size_t i = 0; i < a[k]->size(); ++i) CHECK(b[k]->span()[i] == 2.0 * a[k]->span()[i]);

  CHECK_THROWS_AS(gru_backward(traces, p, std::vector<Vector>(3, Vector(4))), InputError);
}

TEST_CASE("embedding lookup") {
  const Matrix We = Matrix::identity(4);
  CHECK(embed(We, 0) == Vector{1, 0, 0, 0});
  CHECK(embed(We, 2) == embed(We, 2));
  CHECK_THROWS_AS(embed(We, 4), VocabularyError);
}

TEST_CASE("visual head") {
  CHECK(visual_head(Matrix{{1, 1}}, Vector{2, 2}) == Vector{4});
  CHECK(visual_head(Matrix{{1, 1}, {3, -2}}, Vector{0, 0}) == Vector{0, 0});
  Rng rng(6);
  Matrix V(5, 3);
  for (double& x : V.span()) x = rng.uniform(-4, 4);
  for (int i = 0; i < 100; ++i) {
    const Vector out = visual_head(V, random_vector(3, rng, 0, 5));
    for (double x : out) {
      CHECK(x >= 0.0);
      CHECK(x <= 5.0);
    }
  }
  CHECK_THROWS_AS(visual_head(Matrix(2, 3), Vector(2)), ShapeError);
}

TEST_CASE("softmax head") {
  const Vector uniform = textual_head(Matrix(4, 2), Vector{1, 2});
  for (double p : uniform) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  const Vector p = softmax(Vector{std::log(1.0), std::log(3.0)}.span());
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));

  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    Vector logits(20);
    for (double& x : logits) x = rng.uniform(-30, 30);
    const Vector q = softmax(logits.span());
    double s = 0.0;
    for (double x : q) {
      CHECK(x >= 0.0);
      s += x;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);

    Vector shifted = logits;
    for (double& x : shifted) x += 17.5;
    const Vector q2 = softmax(shifted.span());
    for (std::size_t i = 0; i < q.dim(); ++i) CHECK(std::abs(q[i] - q2[i]) < 1e-12);
  }
  CHECK_THROWS_AS(textual_head(Matrix(3, 2), Vector(3)), ShapeError);
}
