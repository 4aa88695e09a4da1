//! Hand-built BP factorizations checked against their dense matrices
//! (unnormalized, as the constructions produce them).

use bpfactor::exact::{circulant_bp2, dct_bp2, dst_bp2, fft_bp, hadamard_bp, toeplitz_bp2r2};
use bpfactor::zoo::{circulant, toeplitz};
use bpfactor::{DenseMatrix, Rng, Scaling, TransformKind, TransformSpec, C64};

fn report(name: &str, got: &DenseMatrix, want: &DenseMatrix) -> bpfactor::Result<()> {
    println!("{name:<10} N={:<4} max |error| {:.2e}", want.rows(), got.max_abs_diff(want)?);
    Ok(())
}

fn main() -> bpfactor::Result<()> {
    let n = 64;
    let dense = |k| TransformSpec::new(k, n).with_scaling(Scaling::Raw).generate();
    report("dft", &fft_bp(n)?.expand(), &dense(TransformKind::Dft)?)?;
    report("hadamard", &hadamard_bp(n)?.expand(), &dense(TransformKind::Hadamard)?)?;
    report("dct", &dct_bp2(n)?.expand(), &dense(TransformKind::Dct)?)?;
    report("dst", &dst_bp2(n)?.expand(), &dense(TransformKind::Dst)?)?;

    let mut rng = Rng::new(1);
    let h: Vec<C64> = (0..n).map(|_| rng.complex_gaussian(0.5)).collect::<Result<_, _>>()?;
    report("circulant", &circulant_bp2(&h)?.expand(), &circulant(&h))?;

    let t: Vec<C64> = (0..2 * n - 1).map(|_| rng.complex_gaussian(0.5)).collect::<Result<_, _>>()?;
    let product = toeplitz_bp2r2(&t)?;
    println!("toeplitz uses an inner size of {}", product.inner_size());
    report("toeplitz", &product.expand(), &toeplitz(&t)?)?;
    Ok(())
}
