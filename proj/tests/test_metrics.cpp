#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pmt/archs.hpp"
#include "pmt/datagen.hpp"
#include "pmt/metrics.hpp"
#include "pmt/train.hpp"

using namespace pmt;

namespace {

Tensor random_image(Shape shape, std::uint64_t seed) {
  Tensor t(shape);
  auto s = rng::Stream(seed);
  for (double& v : t.values) v = s.next_unit();
  return t;
}

// Independent SSIM oracle: direct summation over every window position.
double ssim_direct(const Tensor& a, const Tensor& b) {
  const std::size_t C = a.shape[0], H = a.shape[1], W = a.shape[2];
  const std::size_t win = 7;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double channel_mean = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + win <= H; ++y) {
      for (std::size_t x = 0; x + win <= W; ++x) {
        double ma = 0, mb = 0;
        for (std::size_t dy = 0; dy < win; ++dy) {
          for (std::size_t dx = 0; dx < win; ++dx) {
            ma += a.at(c, y + dy, x + dx);
            mb += b.at(c, y + dy, x + dx);
          }
        }
        ma /= win * win;
        mb /= win * win;
        double va = 0, vb = 0, cov = 0;
        for (std::size_t dy = 0; dy < win; ++dy) {
          for (std::size_t dx = 0; dx < win; ++dx) {
            const double da = a.at(c, y + dy, x + dx) - ma;
            const double db = b.at(c, y + dy, x + dx) - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
          }
        }
        va /= win * win;
        vb /= win * win;
        cov /= win * win;
        acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
    channel_mean += acc / double(count);
  }
  return channel_mean / double(C);
}

const TrainResult& trained_small() {
  static TrainResult r = [] {
    FaceDataset ds = make_dataset(8, 12, 0);
    TrainHyper hyper;
    hyper.epochs = 20;
    return train_recognizer(default_recognizer_spec(8), ds.images, hyper);
  }();
  return r;
}

}  // namespace

TEST_CASE("ssim") {
  SECTION("ssim(x, x) == 1 exactly") {
    Tensor x = render_indexed(1, 0);
    CHECK(ssim(x, x) == 1.0);
  }
  SECTION("matches the direct-summation oracle to 1e-10") {
    for (std::uint64_t t = 0; t < 20; ++t) {
      Tensor a = random_image({1, 8, 8}, 1000 + t);
      Tensor b = random_image({1, 8, 8}, 2000 + t);
      CHECK(ssim(a, b) == Catch::Approx(ssim_direct(a, b)).margin(1e-10));
    }
    // multi-channel path too
    Tensor a = random_image({3, 12, 9}, 1);
    Tensor b = random_image({3, 12, 9}, 2);
    CHECK(ssim(a, b) == Catch::Approx(ssim_direct(a, b)).margin(1e-10));
  }
  SECTION("inverting a mid-contrast image flips the sign") {
    Tensor ramp({1, 16, 16});
    for (std::size_t y = 0; y < 16; ++y) {
      for (std::size_t x = 0; x < 16; ++x) {
        ramp.at(0, y, x) = double(x + y) / 30.0;
      }
    }
    Tensor inv = ramp;
    for (double& v : inv.values) v = 1.0 - v;
    CHECK(ssim(ramp, inv) < 0.0);
  }
  SECTION("symmetry") {
    Tensor a = random_image({3, 10, 10}, 5);
    Tensor b = random_image({3, 10, 10}, 6);
    CHECK(ssim(a, b) == Catch::Approx(ssim(b, a)).margin(1e-12));
  }
  SECTION("errors") {
    CHECK_THROWS_AS(ssim(Tensor({1, 8, 8}), Tensor({1, 9, 8})), ShapeError);
    CHECK_THROWS_AS(ssim(Tensor({1, 5, 5}), Tensor({1, 5, 5})), ShapeError);
  }
}

TEST_CASE("psnr") {
  SECTION("identical images cap at 100 dB") {
    Tensor x = render_indexed(2, 0);
    CHECK(psnr(x, x) == 100.0);
  }
  SECTION("MSE 0.01 gives exactly 20 dB") {
    Tensor a({3, 8, 8}, 0.0);
    Tensor b({3, 8, 8}, 0.1);
    CHECK(psnr(a, b) == Catch::Approx(20.0).margin(1e-9));
  }
  SECTION("strictly decreasing in the noise level") {
    Tensor x = render_indexed(3, 0);
    double prev = 1e9;
    for (double sigma : {0.05, 0.1, 0.2}) {
      Tensor noisy = x;
      auto s = rng::Stream(7);
      for (double& v : noisy.values) v += s.gaussian(0.0, sigma);
      const double p = psnr(x, noisy);
      CHECK(p < prev);
      prev = p;
    }
  }
  SECTION("symmetry") {
    Tensor a = random_image({3, 8, 8}, 1), b = random_image({3, 8, 8}, 2);
    CHECK(psnr(a, b) == Catch::Approx(psnr(b, a)).margin(1e-12));
  }
}

TEST_CASE("cos_sim") {
  SECTION("self similarity is 1") {
    Tensor v({4}, {0.3, -1.2, 0.7, 2.0});
    CHECK(cos_sim(v, v) == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("orthogonal vectors give 0") {
    CHECK(cos_sim(Tensor({2}, {1, 0}), Tensor({2}, {0, 1})) == 0.0);
  }
  SECTION("[3,4] vs [4,3] = 24/25") {
    CHECK(cos_sim(Tensor({2}, {3, 4}), Tensor({2}, {4, 3})) ==
          Catch::Approx(0.96).margin(1e-12));
  }
  SECTION("zero vector is an error") {
    CHECK_THROWS_AS(cos_sim(Tensor({2}), Tensor({2}, {1, 1})), ValueError);
    CHECK_THROWS_AS(cos_sim(Tensor({2}, {1, 1}), Tensor({2})), ValueError);
  }
  SECTION("length mismatch") {
    CHECK_THROWS_AS(cos_sim(Tensor({2}, {1, 1}), Tensor({3}, {1, 1, 1})),
                    ShapeError);
  }
}

TEST_CASE("srra") {
  const Model& model = trained_small().model;
  std::vector<Tensor> originals;
  for (int i = 0; i < 10; ++i) originals.push_back(render_indexed(i, 12));

  SECTION("perfect reconstructions score 1.0") {
    CHECK(srra(originals, originals, model, 0.2) == 1.0);
  }
  SECTION("unrelated renders score low at kappa 0.5") {
    std::vector<Tensor> fakes;
    for (int i = 0; i < 10; ++i) fakes.push_back(render_indexed(500 + i, 0));
    CHECK(srra(originals, fakes, model, 0.5) <= 0.2);
  }
  SECTION("count mismatch") {
    std::vector<Tensor> one{originals[0]};
    CHECK_THROWS_AS(srra(originals, one, model, 0.2), ValueError);
  }
}

TEST_CASE("verification_accuracy") {
  const Model& model = trained_small().model;
  FaceDataset ds = make_dataset(8, 12, 0);
  auto pairs = make_pairs(ds.identity_seeds, 6, 40, 5, 12);

  SECTION("identity transform reduces to standard pair verification") {
    // kappa low enough that the self-match conjunct always holds
    const double kappa = 0.2;
    double standard = 0.0;
    for (const auto& p : pairs) {
      const bool match =
          cos_sim(embed(model, p.image1), embed(model, p.image2)) > kappa;
      standard += match == p.same_identity;
    }
    standard /= double(pairs.size());
    CHECK(verification_accuracy(model, identity_protect(), pairs, kappa) ==
          Catch::Approx(standard).margin(1e-12));
  }
  SECTION("clean accuracy is high on held-out pairs") {
    CHECK(verification_accuracy(model, identity_protect(), pairs, 0.2) >= 0.9);
  }
  SECTION("replacing the probe image with an unrelated render fails the self-match") {
    ProtectFn replace = [](const Tensor&, std::size_t i) {
      return render_indexed(900 + i, 0);
    };
    CHECK(verification_accuracy(model, replace, pairs, 0.5) <= 0.15);
  }
  SECTION("empty pair list") {
    CHECK_THROWS_AS(verification_accuracy(model, identity_protect(), {}, 0.2),
                    ValueError);
  }
}

TEST_CASE("up_metric") {
  const Model& model = trained_small().model;
  std::vector<Tensor> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(render_indexed(i, 12));

  SECTION("sigma 0 with identical inputs: utility 1, privacy 0, total 1") {
    UpParams p = default_up_params(0.0, 0.5, 2, 3);
    UpResult r = up_metric(xs, xs, model, p);
    CHECK(r.utility == 1.0);
    CHECK(r.privacy == Catch::Approx(0.0).margin(1e-12));
    CHECK(r.total == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("independent noise images: privacy >= 0.5, utility ~ 0 at kappa 0.5") {
    std::vector<Tensor> noise;
    for (int i = 0; i < 6; ++i) noise.push_back(random_image({3, 32, 32}, 70 + i));
    UpParams p = default_up_params(0.0, 0.5, 2, 3);
    UpResult r = up_metric(xs, noise, model, p);
    CHECK(r.privacy >= 0.5);
    CHECK(r.utility <= 0.2);
  }
  SECTION("utility is non-increasing in kappa") {
    std::vector<Tensor> perturbed;
    for (const Tensor& x : xs) {
      Tensor t = x;
      auto s = rng::Stream(11);
      for (double& v : t.values) v += s.gaussian(0.0, 0.15);
      clamp01_inplace(t);
      perturbed.push_back(t);
    }
    double prev = 2.0;
    for (double kappa : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      UpParams p = default_up_params(0.1, kappa, 3, 9);
      const double u = up_metric(xs, perturbed, model, p).utility;
      CHECK(u <= prev + 1e-12);
      prev = u;
    }
  }
  SECTION("deterministic per seed") {
    UpParams p = default_up_params(0.1, 0.5, 3, 21);
    UpResult a = up_metric(xs, xs, model, p);
    UpResult b = up_metric(xs, xs, model, p);
    CHECK(a.utility == b.utility);
    CHECK(a.privacy == b.privacy);
  }
  SECTION("count mismatch") {
    UpParams p = default_up_params(0.1, 0.5, 1, 0);
    std::vector<Tensor> one{xs[0]};
    CHECK_THROWS_AS(up_metric(xs, one, model, p), ValueError);
  }
  SECTION("parameter validation") {
    UpParams p = default_up_params(-0.1, 0.5, 1, 0);
    CHECK_THROWS_AS(up_metric(xs, xs, model, p), ValueError);
    p = default_up_params(0.1, 1.5, 1, 0);
    CHECK_THROWS_AS(up_metric(xs, xs, model, p), ValueError);
  }
}

TEST_CASE("attribute_cos_sim stays in [0,1] and is 1 for identical inputs") {
  Model probe = build_model(attribute_probe_spec(), 3);
  Tensor x = render_indexed(4, 0);
  CHECK(attribute_cos_sim(probe, x, x) == Catch::Approx(1.0).margin(1e-12));
  for (int i = 0; i < 5; ++i) {
    Tensor other = random_image({3, 32, 32}, 40 + i);
    const double v = attribute_cos_sim(probe, x, other);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
