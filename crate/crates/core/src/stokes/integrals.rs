use super::{Scenario, StokesError};
use crate::geometry::{Face, Side};
use crate::quadrature::{integrate_unit_cube_with, normal_face_value, pullback_value, Execution};
use crate::summation;

/// One signed face term of the boundary integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceContribution {
    pub piece: usize,
    pub face: Face,
    pub value: f64,
}

/// `∫_S dω`, summed over pieces.
pub fn volume_integral(s: &Scenario) -> Result<f64, StokesError> {
    Ok(summation::sum(volume_by_piece(s)?))
}

pub fn volume_by_piece(s: &Scenario) -> Result<Vec<f64>, StokesError> {
    volume_by_piece_with(s, Execution::default())
}

pub(crate) fn volume_by_piece_with(s: &Scenario, execution: Execution) -> Result<Vec<f64>, StokesError> {
    let k = s.dim();
    let dw = s.derivative();
    s.region()
        .pieces()
        .iter()
        .enumerate()
        .map(|(piece, set)| {
            integrate_unit_cube_with(|t| pullback_value(dw, s.chart(), set, t, None), k, &s.quadrature, execution)
                .map_err(|source| StokesError::Integration { piece, face: None, source })
        })
        .collect()
}

/// `∫_∂S ω` as the sum of all signed face contributions.
pub fn boundary_integral(s: &Scenario) -> Result<f64, StokesError> {
    Ok(summation::sum(boundary_faces(s)?.iter().map(|f| f.value)))
}

/// Every face of every piece, in piece / axis / side order. The value of
/// face `(j, side)` is `±(-1)^(j-1) ∫ b(Φ∘c) det D(Φ∘c)_I/Dt_{-j}` with the
/// plus sign on top faces.
pub fn boundary_faces(s: &Scenario) -> Result<Vec<FaceContribution>, StokesError> {
    boundary_faces_with(s, Execution::default())
}

pub(crate) fn boundary_faces_with(s: &Scenario, execution: Execution) -> Result<Vec<FaceContribution>, StokesError> {
    let k = s.dim();
    let mut out = Vec::with_capacity(s.region().pieces().len() * 2 * k);
    for (piece, set) in s.region().pieces().iter().enumerate() {
        for face in Face::all(k) {
            let col = face.axis - 1;
            let integral = integrate_unit_cube_with(
                |u| pullback_value(s.form(), s.chart(), set, &face.lift(u), Some(col)),
                k - 1,
                &s.quadrature,
                execution,
            )
            .map_err(|source| StokesError::Integration { piece, face: Some(face), source })?;
            out.push(FaceContribution { piece, face, value: orientation(face) * integral });
        }
    }
    Ok(out)
}

fn orientation(face: Face) -> f64 {
    let axis_sign = if face.axis % 2 == 1 { 1.0 } else { -1.0 };
    match face.side {
        Side::Top => axis_sign,
        Side::Bottom => -axis_sign,
    }
}

/// The same face term computed with the unnormalized outward vector:
/// `∫ Σ_I b_I(Φ(z)) det[N(z); DΦ_I(z)] · Π_{i≠j}(g_i - f_i) dt_{-j}`.
/// Summed over all faces it reproduces [`boundary_integral`].
pub fn face_integral_w(s: &Scenario, piece: usize, face: Face) -> Result<f64, StokesError> {
    let set = s.region().pieces().get(piece).ok_or(StokesError::PieceIndex(piece))?;
    let face = Face::new(face.axis, face.side, s.dim()).map_err(|source| StokesError::Geometry { piece: Some(piece), source })?;
    integrate_unit_cube_with(
        |u| normal_face_value(s.form(), s.chart(), set, face, u),
        s.dim() - 1,
        &s.quadrature,
        Execution::default(),
    )
    .map_err(|source| StokesError::Integration { piece, face: Some(face), source })
}
