#ifndef COPYOPT_TEST_MPFR_ORACLE_HPP
#define COPYOPT_TEST_MPFR_ORACLE_HPP

// High-precision reference for the two-proportion z-test and the 2x2
// chi-square, computed from the integer counts at 256 bits.

#include <mpfr.h>

namespace oracle {

struct Mp {
  mpfr_t v;
  Mp() { mpfr_init2(v, 256); }
  explicit Mp(long long x) : Mp() { mpfr_set_sj(v, x, MPFR_RNDN); }
  ~Mp() { mpfr_clear(v); }
  Mp(const Mp&) = delete;
  Mp& operator=(const Mp&) = delete;
  double get() const { return mpfr_get_d(v, MPFR_RNDN); }
};

struct ZResult {
  double z = 0.0;
  double p = 1.0;
};

inline ZResult two_proportion_z(long long s1, long long n1, long long s2, long long n2) {
  Mp a(s1), na(n1), b(s2), nb(n2), pooled, p1, p2, q, se, t, z, p;
  mpfr_add(pooled.v, a.v, b.v, MPFR_RNDN);
  mpfr_add(t.v, na.v, nb.v, MPFR_RNDN);
  mpfr_div(pooled.v, pooled.v, t.v, MPFR_RNDN);
  if (mpfr_sgn(pooled.v) == 0 || mpfr_cmp_ui(pooled.v, 1) == 0) return {0.0, 1.0};
  mpfr_ui_sub(q.v, 1, pooled.v, MPFR_RNDN);
  mpfr_mul(se.v, pooled.v, q.v, MPFR_RNDN);
  mpfr_ui_div(p1.v, 1, na.v, MPFR_RNDN);
  mpfr_ui_div(p2.v, 1, nb.v, MPFR_RNDN);
  mpfr_add(t.v, p1.v, p2.v, MPFR_RNDN);
  mpfr_mul(se.v, se.v, t.v, MPFR_RNDN);
  mpfr_sqrt(se.v, se.v, MPFR_RNDN);
  mpfr_div(p1.v, a.v, na.v, MPFR_RNDN);
  mpfr_div(p2.v, b.v, nb.v, MPFR_RNDN);
  mpfr_sub(z.v, p1.v, p2.v, MPFR_RNDN);
  mpfr_div(z.v, z.v, se.v, MPFR_RNDN);
  // p = erfc(|z| / sqrt 2)
  mpfr_abs(p.v, z.v, MPFR_RNDN);
  mpfr_sqrt_ui(t.v, 2, MPFR_RNDN);
  mpfr_div(p.v, p.v, t.v, MPFR_RNDN);
  mpfr_erfc(p.v, p.v, MPFR_RNDN);
  return {z.get(), p.get()};
}

// Pearson chi-square without continuity correction.
inline double chi_square_2x2(long long s1, long long f1, long long s2, long long f2) {
  Mp a(s1), b(f1), c(s2), d(f2), ad, bc, r1, r2, c1, c2, n, num, den;
  mpfr_mul(ad.v, a.v, d.v, MPFR_RNDN);
  mpfr_mul(bc.v, b.v, c.v, MPFR_RNDN);
  mpfr_sub(num.v, ad.v, bc.v, MPFR_RNDN);
  mpfr_sqr(num.v, num.v, MPFR_RNDN);
  mpfr_add(r1.v, a.v, b.v, MPFR_RNDN);
  mpfr_add(r2.v, c.v, d.v, MPFR_RNDN);
  mpfr_add(c1.v, a.v, c.v, MPFR_RNDN);
  mpfr_add(c2.v, b.v, d.v, MPFR_RNDN);
  mpfr_add(n.v, r1.v, r2.v, MPFR_RNDN);
  mpfr_mul(num.v, num.v, n.v, MPFR_RNDN);
  mpfr_mul(den.v, r1.v, r2.v, MPFR_RNDN);
  mpfr_mul(den.v, den.v, c1.v, MPFR_RNDN);
  mpfr_mul(den.v, den.v, c2.v, MPFR_RNDN);
  if (mpfr_sgn(den.v) == 0) return 0.0;
  mpfr_div(num.v, num.v, den.v, MPFR_RNDN);
  return num.get();
}

}  // namespace oracle

#endif  // COPYOPT_TEST_MPFR_ORACLE_HPP
