//! Case 3: a minimal surface alone, in the gauge `e^ω = tanΛ/√3`.

use std::sync::Arc;

use super::Construction;
use crate::error::Result;
use crate::field::Provenance;
use crate::quat::{ImQuat, Quat};
use crate::surface::SurfaceMap;

const S3: f64 = 1.732_050_807_568_877_2;

/// `Λ = arctan(√3 e^ω)`.
pub fn lambda_case3(omega: f64) -> f64 {
    (S3 * omega.exp()).atan()
}

pub struct Case3 {
    surface: Arc<dyn SurfaceMap>,
}

impl Case3 {
    pub fn new(surface: Arc<dyn SurfaceMap>) -> Self {
        Case3 { surface }
    }
}

impl Construction for Case3 {
    fn case(&self) -> u8 {
        3
    }

    fn forms(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<[ImQuat; 3]> {
        let w = self.surface.omega(x[1], x[2])?;
        let f = self.surface.frame_near((anchor[1], anchor[2]), x[1], x[2])?;
        let (a2, a3) = (f.alpha2(), f.alpha3());
        let c = a2.cross(a3);
        let (e, ei) = (w.f.exp(), (-w.f).exp());
        Ok([
            c * (-S3 * ei / 4.0),
            (a2 * (4.0 * e) - a3 * 4.0 + c * w.fv) * (ei / 8.0),
            (a2 * 4.0 - a3 * (4.0 * e) + c * w.fu) * (-ei / 8.0),
        ])
    }

    fn p(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<Quat> {
        Ok(self.surface.frame_near((anchor[1], anchor[2]), x[1], x[2])?.p)
    }

    fn dp(&self, anchor: [f64; 3], x: [f64; 3]) -> Result<[Quat; 3]> {
        let f = self.surface.frame_near((anchor[1], anchor[2]), x[1], x[2])?;
        Ok([Quat::ZERO, f.du, f.dv])
    }

    fn lambda(&self, x: [f64; 3]) -> Result<f64> {
        Ok(lambda_case3(self.surface.omega(x[1], x[2])?.f))
    }

    fn provenance(&self) -> Provenance {
        self.surface.provenance()
    }
}
