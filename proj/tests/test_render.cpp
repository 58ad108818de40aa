#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hoa/errors.hpp"
#include "hoa/render.hpp"
#include "hoa/shapes.hpp"
#include "hoa/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace hoa;

namespace {

PosedMesh singleTriangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriMesh m;
  m.vertices.resize(3, 3);
  m.vertices << a.transpose(), b.transpose(), c.transpose();
  m.faces.resize(1, 3);
  m.faces << 0, 1, 2;
  return posedFromMesh(m, RigidTransform::identity());
}

PosedMesh boxMesh(const Vec3& center, const Vec3& half) {
  return posedFromMesh(makeBox(half), {Mat3::Identity(), center});
}

}  // namespace

TEST_CASE("project: optical axis, offset point, jacobian") {
  Camera cam;
  cam.fx = cam.fy = 500;
  cam.cx = 320;
  cam.cy = 240;
  cam.width = 640;
  cam.height = 480;

  const Projection p0 = project(Vec3(0, 0, 1), cam);
  CHECK(p0.valid);
  CHECK(p0.u == doctest::Approx(320));
  CHECK(p0.v == doctest::Approx(240));

  const Projection p1 = project(Vec3(0.1, 0, 1), cam);
  CHECK(p1.u == doctest::Approx(370));
  CHECK(p1.v == doctest::Approx(240));

  // Behind-camera flag.
  CHECK_FALSE(project(Vec3(0, 0, -0.5), cam).valid);

  // Jacobian vs finite differences with a nontrivial extrinsic.
  cam.extrinsic.rot = rodrigues(Vec3(0.2, -0.3, 0.1));
  cam.extrinsic.trans = Vec3(0.05, -0.02, 0.2);
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Vec3 x(0.3 * rng.normal(), 0.3 * rng.normal(), 0.8 + 0.3 * rng.uniform());
    const Projection p = project(x, cam, true);
    REQUIRE(p.valid);
    for (int k = 0; k < 3; ++k) {
      Vec3 xp = x, xm = x;
      xp[k] += 1e-7;
      xm[k] -= 1e-7;
      const Projection pp = project(xp, cam);
      const Projection pm = project(xm, cam);
      const double fd_u = (pp.u - pm.u) / 2e-7;
      const double fd_v = (pp.v - pm.v) / 2e-7;
      CHECK(std::abs(p.jac(0, k) - fd_u) / std::max(1.0, std::abs(fd_u)) < 1e-5);
      CHECK(std::abs(p.jac(1, k) - fd_v) / std::max(1.0, std::abs(fd_v)) < 1e-5);
    }
  }
}

TEST_CASE("full-cover triangle: silhouette ~1, plane depth") {
  Camera cam = testutil::simpleCamera(32, 32, 32);
  // Huge triangle on the plane z = 0.7 covering the whole view.
  const PosedMesh tri = singleTriangle(Vec3(-10, -10, 0.7), Vec3(10, -10, 0.7),
                                       Vec3(0, 15, 0.7));
  const RenderOutput out = render(tri, {}, cam, 50.0);
  for (int y = 12; y < 20; ++y) {
    for (int x = 12; x < 20; ++x) {
      CHECK(out.silh_hand.at(x, y) > 0.99);
      CHECK(std::abs(out.depth.at(x, y) - 0.7) < 1e-4);
    }
  }
}

TEST_CASE("empty scene renders empty") {
  Camera cam = testutil::simpleCamera(16, 16, 16);
  const RenderOutput out = render({}, {}, cam, 40.0);
  for (double v : out.silh_hand.data) CHECK(v == 0.0);
  for (double v : out.silh_obj.data) CHECK(v == 0.0);
  for (double v : out.depth.data) CHECK(std::isinf(v));
}

TEST_CASE("mesh fully behind camera gives empty silhouette without error") {
  Camera cam = testutil::simpleCamera(16, 16, 16);
  const PosedMesh tri = singleTriangle(Vec3(-1, -1, -0.5), Vec3(1, -1, -0.5),
                                       Vec3(0, 1, -0.5));
  const RenderOutput out = render(tri, {}, cam, 40.0);
  for (double v : out.silh_hand.data) CHECK(v == 0.0);
}

TEST_CASE("NaN vertex raises invalid input") {
  Camera cam = testutil::simpleCamera(16, 16, 16);
  PosedMesh tri = singleTriangle(Vec3(-1, -1, 0.5), Vec3(1, -1, 0.5), Vec3(0, 1, 0.5));
  tri.vertices(1, 2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(render(tri, {}, cam, 40.0), InvalidInput);
  CHECK_THROWS_AS(hardRasterize(tri, {}, cam), InvalidInput);
}

TEST_CASE("hard rasterize: z order and occlusion labels") {
  Camera cam = testutil::simpleCamera(48, 48, 60);
  const PosedMesh hand = boxMesh(Vec3(0, 0, 0.5), Vec3(0.08, 0.08, 0.02));
  const PosedMesh obj = boxMesh(Vec3(0, 0, 0.8), Vec3(0.15, 0.15, 0.02));

  SUBCASE("hand in front everywhere it overlaps") {
    const HardRaster hr = hardRasterize(hand, obj, cam);
    bool saw_hand = false, saw_obj = false;
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        if (hr.labels.at(x, y) == kLabelHand) {
          saw_hand = true;
          CHECK(hr.depth.at(x, y) == doctest::Approx(0.48));
        }
        if (hr.labels.at(x, y) == kLabelObject) saw_obj = true;
      }
    }
    CHECK(saw_hand);
    CHECK(saw_obj);
  }

  SUBCASE("object occluding the hand wins the label") {
    const PosedMesh obj_front = boxMesh(Vec3(0, 0, 0.3), Vec3(0.05, 0.05, 0.02));
    const HardRaster hr = hardRasterize(hand, obj_front, cam);
    // Center pixel: object at z=0.28 in front of hand at z=0.48.
    CHECK(hr.labels.at(24, 24) == kLabelObject);
    CHECK(hr.depth.at(24, 24) == doctest::Approx(0.28));
  }
}

TEST_CASE("hard depth equals analytic ray casting at random pixels") {
  Camera cam = testutil::simpleCamera(64, 64, 70);
  cam.extrinsic.rot = rodrigues(Vec3(0.05, -0.1, 0.02));
  cam.extrinsic.trans = Vec3(0.02, 0.01, 0.0);
  const PosedMesh hand = boxMesh(Vec3(-0.02, 0.01, 0.6), Vec3(0.07, 0.05, 0.04));
  const PosedMesh obj = boxMesh(Vec3(0.03, -0.02, 0.75), Vec3(0.1, 0.08, 0.05));
  const HardRaster hr = hardRasterize(hand, obj, cam);

  Rng rng(17);
  int checked = 0;
  while (checked < 20) {
    const int x = rng.uniformInt(64), y = rng.uniformInt(64);
    // Reference: minimum over all faces of both meshes of analytic ray hits.
    const Vec3 dir = pixelRay(x + 0.5, y + 0.5, cam);
    double best = std::numeric_limits<double>::infinity();
    for (const PosedMesh* mesh : {&hand, &obj}) {
      for (int f = 0; f < mesh->faceCount(); ++f) {
        Vec3 tri[3];
        for (int k = 0; k < 3; ++k) {
          tri[k] = cam.extrinsic.apply(mesh->vertices.row(mesh->faces(f, k)));
        }
        const double t = oracle::planeRayCast(dir, tri[0], tri[1], tri[2]);
        if (t > 0) best = std::min(best, t);
      }
    }
    if (!std::isfinite(best)) continue;  // background pixel, resample
    CHECK(std::abs(hr.depth.at(x, y) - best) < 1e-6);
    ++checked;
  }
}

TEST_CASE("soft/hard consistency at high sharpness") {
  Camera cam = testutil::simpleCamera(64, 64, 70);
  Rng rng(29);
  for (int scene = 0; scene < 3; ++scene) {
    const PosedMesh hand = boxMesh(
        Vec3(0.06 * rng.normal(), 0.06 * rng.normal(), 0.55 + 0.1 * rng.uniform()),
        Vec3(0.05 + 0.02 * rng.uniform(), 0.05, 0.03));
    const PosedMesh obj = boxMesh(
        Vec3(0.06 * rng.normal(), 0.06 * rng.normal(), 0.75 + 0.1 * rng.uniform()),
        Vec3(0.08, 0.06, 0.04));
    const RenderOutput soft = render(hand, obj, cam, 100.0);
    const HardRaster hard = hardRasterize(hand, obj, cam);
    auto interior = [&](int x, int y) {
      if (x < 1 || y < 1 || x >= 63 || y >= 63) return false;
      const uint8_t l = hard.labels.at(x, y);
      return hard.labels.at(x - 1, y) == l && hard.labels.at(x + 1, y) == l &&
             hard.labels.at(x, y - 1) == l && hard.labels.at(x, y + 1) == l;
    };
    double err_sum = 0;
    int inter_h = 0, union_h = 0, inter_o = 0, union_o = 0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const bool hh = hard.labels.at(x, y) == kLabelHand;
        const bool ho = hard.labels.at(x, y) == kLabelObject;
        const bool sh = soft.silh_hand.at(x, y) > 0.5;
        const bool so = soft.silh_obj.at(x, y) > 0.5;
        err_sum += std::abs(soft.silh_hand.at(x, y) - (hh ? 1.0 : 0.0)) +
                   std::abs(soft.silh_obj.at(x, y) - (ho ? 1.0 : 0.0));
        inter_h += hh && sh;
        union_h += hh || sh;
        inter_o += ho && so;
        union_o += ho || so;
        if (interior(x, y) && std::isfinite(soft.depth.at(x, y)) &&
            std::isfinite(hard.depth.at(x, y))) {
          CHECK(std::abs(soft.depth.at(x, y) - hard.depth.at(x, y)) < 1e-9);
        }
      }
    }
    CHECK(err_sum / (2.0 * 64 * 64) < 0.01);
    CHECK(static_cast<double>(inter_h) / union_h > 0.99);
    CHECK(static_cast<double>(inter_o) / union_o > 0.99);
  }
}

TEST_CASE("silhouette sharpness monotonicity across 0.5") {
  Camera cam = testutil::simpleCamera(32, 32, 40);
  const PosedMesh tri = singleTriangle(Vec3(-0.15, -0.15, 0.6), Vec3(0.15, -0.15, 0.6),
                                       Vec3(0.0, 0.2, 0.6));
  const RenderOutput lo = render(tri, {}, cam, 20.0);
  const RenderOutput hi = render(tri, {}, cam, 120.0);
  const HardRaster hard = hardRasterize(tri, {}, cam);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const bool inside = hard.labels.at(x, y) == kLabelHand;
      const double a = lo.silh_hand.at(x, y);
      const double b = hi.silh_hand.at(x, y);
      if (a > 0.55 && inside) CHECK(b > 0.5);
      if (a < 0.45 && !inside) CHECK(b < 0.5);
    }
  }
}

TEST_CASE("render is deterministic") {
  Camera cam = testutil::simpleCamera(48, 48, 60);
  const PosedMesh hand = boxMesh(Vec3(0.01, 0, 0.5), Vec3(0.06, 0.05, 0.03));
  const PosedMesh obj = boxMesh(Vec3(-0.02, 0.01, 0.7), Vec3(0.08, 0.07, 0.04));
  const RenderOutput a = render(hand, obj, cam, 40.0);
  const RenderOutput b = render(hand, obj, cam, 40.0);
  CHECK(a.silh_hand.data == b.silh_hand.data);
  CHECK(a.silh_obj.data == b.silh_obj.data);
  CHECK(a.depth.data == b.depth.data);
}

TEST_CASE("silhouette gradients match finite differences on a tiny scene") {
  Camera cam = testutil::simpleCamera(16, 16, 18);
  // Two triangles, one per class.
  TriMesh t1, t2;
  t1.vertices.resize(3, 3);
  t1.vertices << -0.15, -0.1, 0.5, 0.2, -0.12, 0.55, 0.0, 0.18, 0.5;
  t1.faces.resize(1, 3);
  t1.faces << 0, 1, 2;
  t2.vertices.resize(3, 3);
  t2.vertices << -0.1, -0.15, 0.7, 0.25, 0.0, 0.72, -0.05, 0.2, 0.7;
  t2.faces.resize(1, 3);
  t2.faces << 0, 1, 2;

  auto loss = [&](const MatX& v1, const MatX& v2) {
    TriMesh a = t1, b = t2;
    a.vertices = v1;
    b.vertices = v2;
    const RenderOutput out = render(posedFromMesh(a, RigidTransform::identity()),
                                    posedFromMesh(b, RigidTransform::identity()),
                                    cam, 8.0);
    // Weighted sum so hand/object and depth all participate; depth summed
    // only over covered pixels via a smooth weight on silhouette.
    double sum = 0;
    for (int i = 0; i < 16 * 16; ++i) {
      sum += 1.3 * out.silh_hand.data[i] + 0.7 * out.silh_obj.data[i];
    }
    return sum;
  };

  // Analytic gradient via backward with unit upstream weights.
  const RenderOutput out = render(posedFromMesh(t1, RigidTransform::identity()),
                                  posedFromMesh(t2, RigidTransform::identity()),
                                  cam, 8.0);
  ImageD g_sh(16, 16, 1.3), g_so(16, 16, 0.7);
  MatX grad1, grad2;
  out.backward(g_sh, g_so, {}, grad1, grad2);

  const double step = 1e-4;
  for (int mesh = 0; mesh < 2; ++mesh) {
    MatX& v = mesh == 0 ? t1.vertices : t2.vertices;
    const MatX& g = mesh == 0 ? grad1 : grad2;
    VecX fd(9), an(9);
    for (int i = 0; i < 9; ++i) {
      MatX vp = v, vm = v;
      vp.data()[0] = vp.data()[0];  // no-op to keep layout clear
      vp(i / 3, i % 3) += step;
      vm(i / 3, i % 3) -= step;
      const double fp = mesh == 0 ? loss(vp, t2.vertices) : loss(t1.vertices, vp);
      const double fm = mesh == 0 ? loss(vm, t2.vertices) : loss(t1.vertices, vm);
      fd[i] = (fp - fm) / (2 * step);
      an[i] = g(i / 3, i % 3);
    }
    CHECK(oracle::vecRelError(an, fd) < 1e-2);
  }
}

TEST_CASE("depth gradients match finite differences") {
  Camera cam = testutil::simpleCamera(16, 16, 18);
  TriMesh t1;
  t1.vertices.resize(3, 3);
  t1.vertices << -0.4, -0.35, 0.5, 0.5, -0.4, 0.62, 0.0, 0.55, 0.55;
  t1.faces.resize(1, 3);
  t1.faces << 0, 1, 2;

  // Sum of finite depths over pixels covered at the unperturbed state;
  // with the triangle covering those pixels robustly, the set is constant
  // under small perturbations.
  const RenderOutput base = render(posedFromMesh(t1, RigidTransform::identity()),
                                   {}, cam, 40.0);
  std::vector<int> active;
  for (int i = 0; i < 16 * 16; ++i) {
    if (std::isfinite(base.depth.data[i])) active.push_back(i);
  }
  REQUIRE(active.size() > 30);

  auto loss = [&](const MatX& v) {
    TriMesh a = t1;
    a.vertices = v;
    const RenderOutput out =
        render(posedFromMesh(a, RigidTransform::identity()), {}, cam, 40.0);
    double sum = 0;
    for (int i : active) sum += out.depth.data[i];
    return sum;
  };

  ImageD g_depth(16, 16, 0.0);
  for (int i : active) g_depth.data[i] = 1.0;
  MatX grad1, grad2;
  base.backward({}, {}, g_depth, grad1, grad2);

  const double step = 1e-5;
  VecX fd(9), an(9);
  for (int i = 0; i < 9; ++i) {
    MatX vp = t1.vertices, vm = t1.vertices;
    vp(i / 3, i % 3) += step;
    vm(i / 3, i % 3) -= step;
    fd[i] = (loss(vp) - loss(vm)) / (2 * step);
    an[i] = grad1(i / 3, i % 3);
  }
  CHECK(oracle::vecRelError(an, fd) < 1e-3);
}
