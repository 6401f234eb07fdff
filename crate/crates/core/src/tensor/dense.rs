use super::{gemm, LayerGrads, Matrix, ParamGrad, Real};
use crate::error::{Error, Result};

/// `y = x·Wᵀ + b` row by row, with `W` stored `[out, in]`.
pub fn dense<T: Real>(input: &Matrix<T>, weights: &[T], bias: &[T]) -> Result<Matrix<T>> {
    let (rows, fin) = (input.rows(), input.cols());
    let fout = bias.len();
    if weights.len() != fout * fin {
        return Err(Error::Contract(format!(
            "dense weights hold {} values, [{fout}, {fin}] needs {}",
            weights.len(),
            fout * fin
        )));
    }
    let mut out = Matrix::zeros(rows, fout);
    for r in 0..rows {
        out.row_mut(r).copy_from_slice(bias);
    }
    gemm(
        rows,
        fin,
        fout,
        T::one(),
        input.data(),
        (fin, 1),
        weights,
        (1, fin),
        T::one(),
        out.data_mut(),
        (fout, 1),
    );
    Ok(out)
}

pub fn dense_backward<T: Real>(
    input: &Matrix<T>,
    weights: &[T],
    output_grad: &Matrix<T>,
) -> Result<LayerGrads<Matrix<T>, T>> {
    let (rows, fin) = (input.rows(), input.cols());
    let fout = output_grad.cols();
    if output_grad.rows() != rows || weights.len() != fout * fin {
        return Err(Error::Contract(format!(
            "dense backward: input {rows}x{fin}, grad {}x{fout}, weights {}",
            output_grad.rows(),
            weights.len()
        )));
    }
    let mut dx = Matrix::zeros(rows, fin);
    gemm(
        rows,
        fout,
        fin,
        T::one(),
        output_grad.data(),
        (fout, 1),
        weights,
        (fin, 1),
        T::zero(),
        dx.data_mut(),
        (fin, 1),
    );
    let mut dw = vec![T::zero(); fout * fin];
    gemm(
        fout,
        rows,
        fin,
        T::one(),
        output_grad.data(),
        (1, fout),
        input.data(),
        (fin, 1),
        T::zero(),
        &mut dw,
        (fin, 1),
    );
    let db = (0..fout)
        .map(|o| T::from_f64((0..rows).map(|r| output_grad.row(r)[o].as_f64()).sum::<f64>()))
        .collect();
    Ok(LayerGrads {
        input_grad: dx,
        param_grads: vec![
            ParamGrad {
                name: "weight",
                shape: vec![fout, fin],
                data: dw,
            },
            ParamGrad {
                name: "bias",
                shape: vec![fout],
                data: db,
            },
        ],
    })
}
