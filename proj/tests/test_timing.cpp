#include <doctest.h>

#include <time.h>

#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sfcb/errors.hpp"
#include "sfcb/timing.hpp"

using namespace sfcb;

namespace {

TimerSet fixture(double elems, double sides, double modal, std::size_t ne, std::size_t ns, std::size_t nm) {
  TimerSet t;
  t[Category::DgElems] = elems;
  t[Category::DgSides] = sides;
  t[Category::DgModal] = modal;
  t.n_elems = ne;
  t.n_sides = ns;
  t.n_modal_elems = nm;
  return t;
}

double raw_clock(clockid_t id) {
  timespec ts{};
  clock_gettime(id, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

}  // namespace

TEST_CASE("attribution examples") {
  const std::vector<std::size_t> none;
  auto a = attribute_costs(fixture(10, 0, 0, 5, 0, 0), std::vector<bool>(5, false), none);
  CHECK(a == std::vector<double>(5, 2.0));

  const std::vector<std::size_t> s2e{0, 0, 1};
  a = attribute_costs(fixture(0, 6, 0, 2, 3, 0), std::vector<bool>(2, false), s2e);
  CHECK(a == std::vector<double>{4.0, 2.0});

  // Elements 0 and 3 are modal; evaluated by hand from the three formulas.
  a = attribute_costs(fixture(10, 6, 4, 5, 3, 2), {true, false, false, true, false}, s2e);
  CHECK(a == std::vector<double>{8.0, 4.0, 2.0, 4.0, 2.0});
}

TEST_CASE("attribution errors") {
  const std::vector<std::size_t> s2e{0};
  CHECK_THROWS_AS(attribute_costs(fixture(1, 0, 1, 2, 0, 0), {false, false}, {}), AttributionError);
  CHECK_THROWS_AS(attribute_costs(fixture(1, 1, 0, 2, 0, 0), {false, false}, {}), AttributionError);
  CHECK_NOTHROW(attribute_costs(fixture(1, 0, 0, 2, 0, 0), {false, false}, {}));
}

TEST_CASE("conservation, monotonicity and modal dominance on random fixtures") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t ne = 1 + rng() % 200, ns = 1 + rng() % 600;
    std::vector<bool> modal(ne);
    std::size_t nm = 0;
    for (std::size_t e = 0; e < ne; ++e) nm += (modal[e] = u(rng) < 0.4);
    std::vector<std::size_t> s2e(ns);
    for (auto& s : s2e) s = rng() % ne;
    const double te = u(rng), ts = u(rng), tm = nm ? u(rng) : 0.0;
    const auto a = attribute_costs(fixture(te, ts, tm, ne, ns, nm), modal, s2e);
    REQUIRE(a.size() == ne);
    const double sum = std::accumulate(a.begin(), a.end(), 0.0);
    CHECK(std::abs(sum - (te + ts + tm)) <= 1e-12 * (te + ts + tm));
    for (double c : a) CHECK(c >= 0.0);

    // A second interval only adds.
    const auto b = attribute_costs(fixture(u(rng), u(rng), nm ? u(rng) : 0.0, ne, ns, nm), modal, s2e);
    for (std::size_t e = 0; e < ne; ++e) CHECK(a[e] + b[e] >= a[e]);
  }
  // All else equal: no sides, modal share positive.
  const auto a = attribute_costs(fixture(3, 0, 1, 6, 0, 2), {false, true, false, true, false, false}, {});
  for (int m : {1, 3})
    for (int n : {0, 2, 4, 5}) CHECK(a[static_cast<std::size_t>(m)] > a[static_cast<std::size_t>(n)]);
}

TEST_CASE("section timers") {
  TimerSet t;
  {
    SectionTimer s(t, Category::DgElems);
  }
  CHECK(t.total() == 0.0);  // inactive

  t.active = true;
  const double d = 0.02;
  {
    SectionTimer s(t, Category::DgSides);
    const double start = raw_clock(CLOCK_THREAD_CPUTIME_ID);
    volatile double sink = 0.0;
    while (raw_clock(CLOCK_THREAD_CPUTIME_ID) - start < d) sink = sink + 1.0;
  }
  CHECK(t[Category::DgSides] >= d);
  CHECK(t[Category::DgSides] <= d + 1e-3);
  CHECK(t[Category::DgElems] == 0.0);

  {
    SectionTimer outer(t, Category::DgElems);
    CHECK_THROWS_AS(SectionTimer(t, Category::DgModal), std::logic_error);
  }
  // The set is usable again after the outer section closed.
  CHECK_NOTHROW(SectionTimer(t, Category::DgModal));

  // Clock resolution well below a microsecond.
  timespec res{};
  clock_getres(CLOCK_THREAD_CPUTIME_ID, &res);
  CHECK(res.tv_sec == 0);
  CHECK(res.tv_nsec <= 100);
  CHECK(clock_seconds(ClockKind::Monotonic) > 0.0);
}

TEST_CASE("cost smoother") {
  CostSmoother s(0.5);
  CHECK(s.update(std::vector<double>{2.0, 4.0}) == std::vector<double>{2.0, 4.0});
  CHECK(s.update(std::vector<double>{4.0, 0.0}) == std::vector<double>{3.0, 2.0});
  // A length change restarts the average.
  CHECK(s.update(std::vector<double>{1.0}) == std::vector<double>{1.0});
  CostSmoother latest(1.0);
  latest.update(std::vector<double>{5.0});
  CHECK(latest.update(std::vector<double>{7.0}) == std::vector<double>{7.0});
  CHECK_THROWS(CostSmoother(0.0));
  CHECK_THROWS(CostSmoother(1.5));
}

TEST_CASE("cost csv") {
  std::ostringstream out;
  write_cost_csv(out, 10, 100, std::vector<double>{0.5, 0.25}, true);
  write_cost_csv(out, 20, 100, std::vector<double>{1.0}, false);
  CHECK(out.str() == "step,element_global_id,cost_seconds\n10,100,0.5\n10,101,0.25\n20,100,1\n");
}
