#pragma once
// quadratic Lagrange elements on the reference triangle (internal)
#include <array>
#include <vector>

namespace hl {

// sub-triangle Dunavant points: 28 nodes, weights sum to 1/2
struct QP {
  double s, t, w;
};

inline const std::vector<QP>& p2_rule() {
  static const std::vector<QP> rule = [] {
    const double a1 = 0.059715871789770, b1 = 0.470142064105115;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456;
    const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
    const std::array<std::array<double, 4>, 7> q = {{{1.0 / 3, 1.0 / 3, 1.0 / 3, w0},
                                                     {a1, b1, b1, w1},
                                                     {b1, a1, b1, w1},
                                                     {b1, b1, a1, w1},
                                                     {a2, b2, b2, w2},
                                                     {b2, a2, b2, w2},
                                                     {b2, b2, a2, w2}}};
    const double sub[4][3][2] = {{{0, 0}, {.5, 0}, {0, .5}},
                                 {{.5, 0}, {1, 0}, {.5, .5}},
                                 {{0, .5}, {.5, .5}, {0, 1}},
                                 {{.5, 0}, {.5, .5}, {0, .5}}};
    std::vector<QP> r;
    for (const auto& S : sub)
      for (const auto& p : q)
        r.push_back({p[0] * S[0][0] + p[1] * S[1][0] + p[2] * S[2][0],
                     p[0] * S[0][1] + p[1] * S[1][1] + p[2] * S[2][1], p[3] / 4 * 0.5});
    return r;
  }();
  return rule;
}

inline void p2_shape(double s, double t, double N[6], double Ns[6], double Nt[6]) {
  double l0 = 1 - s - t, l1 = s, l2 = t;
  N[0] = l0 * (2 * l0 - 1);
  N[1] = l1 * (2 * l1 - 1);
  N[2] = l2 * (2 * l2 - 1);
  N[3] = 4 * l0 * l1;
  N[4] = 4 * l1 * l2;
  N[5] = 4 * l2 * l0;
  Ns[0] = -(4 * l0 - 1);
  Ns[1] = 4 * l1 - 1;
  Ns[2] = 0;
  Ns[3] = 4 * (l0 - l1);
  Ns[4] = 4 * l2;
  Ns[5] = -4 * l2;
  Nt[0] = -(4 * l0 - 1);
  Nt[1] = 0;
  Nt[2] = 4 * l2 - 1;
  Nt[3] = -4 * l1;
  Nt[4] = 4 * l1;
  Nt[5] = 4 * (l0 - l2);
}


}  // namespace hl
