//! Lower envelopes of parabolas on uniform 1-D grids and their separable
//! extension to products of grids (min-plus convolution with a quadratic).

use rayon::prelude::*;

/// out[q] = min_p f[p] + weight·((q − p)·spacing)², with arg[q] the minimizing p.
///
/// Entries equal to +∞ never win. If all entries are +∞, out is +∞ and arg is the identity.
pub fn lower_envelope_1d(f: &[f64], spacing: f64, weight: f64, out: &mut [f64], arg: &mut [usize]) {
    let len = f.len();
    let c = weight * spacing * spacing;
    // parabola roots (v) and breakpoints (z) of the envelope
    let mut v: Vec<usize> = Vec::with_capacity(len);
    let mut z: Vec<f64> = Vec::with_capacity(len + 1);
    for q in 0..len {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let (qf, pf) = (q as f64, p as f64);
                    let s = ((f[q] + c * qf * qf) - (f[p] + c * pf * pf)) / (2.0 * c * (qf - pf));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                        continue;
                    }
                    v.push(q);
                    z.push(s);
                    break;
                }
            }
        }
    }
    if v.is_empty() {
        for q in 0..len {
            out[q] = f64::INFINITY;
            arg[q] = q;
        }
        return;
    }
    z.push(f64::INFINITY);
    let mut k = 0;
    for q in 0..len {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        let d = qf - p as f64;
        out[q] = f[p] + c * d * d;
        arg[q] = p;
    }
}

/// Separable min-plus convolution of `data` (row-major, first axis fastest) with
/// Σ_d weights[d]·(spacing_d·Δi_d)². Returns, for every cell, the flat index of its minimizer.
pub fn separable_envelope(data: &mut [f64], shape: &[usize], spacings: &[f64], weights: &[f64]) -> Vec<usize> {
    let total: usize = shape.iter().product();
    assert_eq!(total, data.len());
    let mut src: Vec<usize> = (0..total).collect();
    let mut stride = 1;
    for (d, &len) in shape.iter().enumerate() {
        let lines = total / len;
        let results: Vec<(Vec<f64>, Vec<usize>)> = (0..lines)
            .into_par_iter()
            .map(|line| {
                let base = (line / stride) * stride * len + line % stride;
                let f: Vec<f64> = (0..len).map(|i| data[base + i * stride]).collect();
                let mut out = vec![0.0; len];
                let mut arg = vec![0usize; len];
                lower_envelope_1d(&f, spacings[d], weights[d], &mut out, &mut arg);
                let srcs = arg.iter().map(|&p| src[base + p * stride]).collect();
                (out, srcs)
            })
            .collect();
        for (line, (out, srcs)) in results.into_iter().enumerate() {
            let base = (line / stride) * stride * len + line % stride;
            for i in 0..len {
                data[base + i * stride] = out[i];
                src[base + i * stride] = srcs[i];
            }
        }
        stride *= len;
    }
    src
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(f: &[f64], spacing: f64, w: f64) -> Vec<f64> {
        (0..f.len())
            .map(|q| {
                (0..f.len())
                    .map(|p| f[p] + w * ((q as f64 - p as f64) * spacing).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn all_infinite_stays_infinite() {
        let f = [f64::INFINITY; 4];
        let mut out = [0.0; 4];
        let mut arg = [0; 4];
        lower_envelope_1d(&f, 1.0, 1.0, &mut out, &mut arg);
        assert!(out.iter().all(|v| v.is_infinite()));
    }

    proptest! {
        #[test]
        fn matches_brute_force(f in proptest::collection::vec(prop_oneof![-5.0..5.0f64, Just(f64::INFINITY)], 1..40),
                               spacing in 0.01..1.0f64, w in 0.1..10.0f64) {
            let mut out = vec![0.0; f.len()];
            let mut arg = vec![0; f.len()];
            lower_envelope_1d(&f, spacing, w, &mut out, &mut arg);
            let b = brute(&f, spacing, w);
            for q in 0..f.len() {
                if b[q].is_finite() {
                    prop_assert!((out[q] - b[q]).abs() <= 1e-9 * (1.0 + b[q].abs()));
                    let d = (q as f64 - arg[q] as f64) * spacing;
                    prop_assert!((f[arg[q]] + w * d * d - b[q]).abs() <= 1e-9 * (1.0 + b[q].abs()));
                } else {
                    prop_assert!(out[q].is_infinite());
                }
            }
        }

        #[test]
        fn separable_matches_brute_force_2d(vals in proptest::collection::vec(-3.0..3.0f64, 30)) {
            let shape = [5usize, 6];
            let mut data = vals.clone();
            let src = separable_envelope(&mut data, &shape, &[0.3, 0.7], &[2.0, 0.5]);
            for q in 0..30 {
                let (qi, qj) = (q % 5, q / 5);
                let mut best = f64::INFINITY;
                for p in 0..30 {
                    let (pi, pj) = (p % 5, p / 5);
                    let c = vals[p] + 2.0 * (0.3 * (qi as f64 - pi as f64)).powi(2) + 0.5 * (0.7 * (qj as f64 - pj as f64)).powi(2);
                    best = best.min(c);
                }
                prop_assert!((data[q] - best).abs() < 1e-9);
                let p = src[q];
                let (pi, pj) = (p % 5, p / 5);
                let c = vals[p] + 2.0 * (0.3 * (qi as f64 - pi as f64)).powi(2) + 0.5 * (0.7 * (qj as f64 - pj as f64)).powi(2);
                prop_assert!((c - best).abs() < 1e-9);
            }
        }
    }
}
