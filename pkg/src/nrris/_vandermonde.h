/* Structured response kernels over uniform-linear-array phasors.
 *
 * forward:  y_l = sum_n z_l^n x_n          (Horner in z^2, even and odd parts)
 * adjoint:  h_n = sum_l conj(z_l)^n s_l    (running powers)
 *
 * Grid angles are processed in lanes of NR_LANES with all state in small
 * local arrays, so both loops are compute bound and vectorise.  L must be
 * a multiple of NR_LANES (callers pad with z = 1, s = 0).
 */
#ifndef NRRIS_VANDERMONDE_H
#define NRRIS_VANDERMONDE_H

#include <stddef.h>

#define NR_LANES 32

#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
#define NR_CLONES __attribute__((target_clones("avx512f", "avx2", "default")))
#else
#define NR_CLONES
#endif

NR_CLONES static void nr_forward(size_t L, size_t N,
                                 const double *restrict zr, const double *restrict zi,
                                 const double *restrict xr, const double *restrict xi,
                                 double *restrict yr, double *restrict yi)
{
    /* even and odd coefficients run as two Horner chains in z^2 */
    for (size_t l0 = 0; l0 < L; l0 += NR_LANES) {
        double er[NR_LANES], ei[NR_LANES], or_[NR_LANES], oi[NR_LANES];
        double cr[NR_LANES], ci[NR_LANES];
        for (size_t k = 0; k < NR_LANES; ++k) {
            er[k] = ei[k] = or_[k] = oi[k] = 0.0;
            const double a = zr[l0 + k], b = zi[l0 + k];
            cr[k] = a * a - b * b;
            ci[k] = 2.0 * a * b;
        }
        size_t top = N & ~(size_t)1;
        if (N & 1) {
            for (size_t k = 0; k < NR_LANES; ++k) {
                er[k] = xr[N - 1];
                ei[k] = xi[N - 1];
            }
        }
        for (size_t m = top; m > 0; m -= 2) {
            const double e_r = xr[m - 2], e_i = xi[m - 2];
            const double o_r = xr[m - 1], o_i = xi[m - 1];
            for (size_t k = 0; k < NR_LANES; ++k) {
                double t = er[k] * cr[k] - ei[k] * ci[k] + e_r;
                ei[k] = er[k] * ci[k] + ei[k] * cr[k] + e_i;
                er[k] = t;
                double u = or_[k] * cr[k] - oi[k] * ci[k] + o_r;
                oi[k] = or_[k] * ci[k] + oi[k] * cr[k] + o_i;
                or_[k] = u;
            }
        }
        /* y = E(z^2) + z O(z^2) */
        for (size_t k = 0; k < NR_LANES; ++k) {
            const double a = zr[l0 + k], b = zi[l0 + k];
            yr[l0 + k] = er[k] + a * or_[k] - b * oi[k];
            yi[l0 + k] = ei[k] + a * oi[k] + b * or_[k];
        }
    }
}

/* hr/hi: caller-zeroed workspaces of N * NR_LANES doubles; the per-lane
 * partial sums are folded into outr/outi at the end. */
NR_CLONES static void nr_adjoint(size_t L, size_t N,
                                 const double *restrict zr, const double *restrict zi,
                                 const double *restrict sr, const double *restrict si,
                                 double *restrict hr, double *restrict hi,
                                 double *restrict outr, double *restrict outi)
{
    for (size_t l0 = 0; l0 < L; l0 += NR_LANES) {
        double wr[NR_LANES], wi[NR_LANES], cr[NR_LANES], ci[NR_LANES];
        double qr[NR_LANES], qi[NR_LANES];
        for (size_t k = 0; k < NR_LANES; ++k) {
            wr[k] = 1.0;
            wi[k] = 0.0;
            cr[k] = zr[l0 + k];
            ci[k] = zi[l0 + k];
            qr[k] = sr[l0 + k];
            qi[k] = si[l0 + k];
        }
        for (size_t n = 0; n < N; ++n) {
            double *restrict gr = hr + n * NR_LANES;
            double *restrict gi = hi + n * NR_LANES;
            for (size_t k = 0; k < NR_LANES; ++k) {
                gr[k] += wr[k] * qr[k] - wi[k] * qi[k];
                gi[k] += wr[k] * qi[k] + wi[k] * qr[k];
                double t = wr[k] * cr[k] + wi[k] * ci[k];
                wi[k] = wi[k] * cr[k] - wr[k] * ci[k];
                wr[k] = t;
            }
        }
    }
    for (size_t n = 0; n < N; ++n) {
        double tr = 0.0, ti = 0.0;
        for (size_t k = 0; k < NR_LANES; ++k) {
            tr += hr[n * NR_LANES + k];
            ti += hi[n * NR_LANES + k];
        }
        outr[n] = tr;
        outi[n] = ti;
    }
}

#endif
