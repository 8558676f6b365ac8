//! JSON body descriptions shared by the command-line tools.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constructions::{make_ball, make_cube, make_glued_cones};
use crate::error::{Error, Result};
use crate::geometry::{affine_image, Halfspace, KOfMHalfspaces, KOfMPolytopes, Point, Polytope, SharedBody};
use crate::hardness::{make_clique_body, Graph};
use crate::thinpart::{StarPolygon, Vertex};

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    KOfMHalfspaces {
        k: usize,
        halfspaces: Vec<Halfspace>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        box_bound: Option<Vec<Halfspace>>,
        #[serde(rename = "x0")]
        witness: Point,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_bound: Option<f64>,
    },
    KOfMPolytopes {
        k: usize,
        polytopes: Vec<Polytope>,
        #[serde(rename = "x0")]
        witness: Point,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_bound: Option<f64>,
    },
    Ball {
        n: usize,
        #[serde(default = "unit")]
        radius: f64,
    },
    Cube {
        n: usize,
        #[serde(default = "unit")]
        half_width: f64,
    },
    GluedCones {
        n: usize,
        eta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis_scale: Option<f64>,
    },
    CliqueReduction {
        graph: Graph,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
    },
    Polygon {
        vertices: Vec<Vertex>,
    },
    /// `{A·x + b : x ∈ body}` with `A` given row by row.
    Affine {
        body: Box<BodySpec>,
        matrix: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
}

impl BodySpec {
    pub fn build(&self) -> Result<SharedBody> {
        Ok(match self {
            BodySpec::KOfMHalfspaces { k, halfspaces, box_bound, witness, radius_bound } => Arc::new(
                KOfMHalfspaces::new(*k, halfspaces.clone(), box_bound.clone(), witness.clone(), *radius_bound)?,
            ),
            BodySpec::KOfMPolytopes { k, polytopes, witness, radius_bound } => {
                let polys = polytopes.iter().map(|p| Polytope::new(p.halfspaces.clone())).collect::<Result<_>>()?;
                Arc::new(KOfMPolytopes::new(*k, polys, witness.clone(), *radius_bound)?)
            }
            BodySpec::Ball { n, radius } => Arc::new(make_ball(*n, *radius)?),
            BodySpec::Cube { n, half_width } => Arc::new(make_cube(*n, *half_width)?),
            BodySpec::GluedCones { n, eta, axis_scale } => {
                let g = make_glued_cones(*n, *eta)?;
                Arc::new(match axis_scale {
                    Some(s) => g.with_axis_scale(*s)?,
                    None => g,
                })
            }
            BodySpec::CliqueReduction { graph, k, a } => Arc::new(make_clique_body(graph.clone(), *k, *a)?),
            BodySpec::Polygon { vertices } => Arc::new(StarPolygon::new(vertices.clone())?),
            BodySpec::Affine { body, matrix, shift } => {
                let rows = matrix.len();
                let cols = matrix.first().map_or(0, Vec::len);
                if rows == 0 || matrix.iter().any(|r| r.len() != cols) {
                    return Err(Error::InvalidSpec("affine matrix must be a nonempty rectangular list of rows".into()));
                }
                let m = DMatrix::from_row_iterator(rows, cols, matrix.iter().flatten().copied());
                affine_image(body.build()?, m, shift.clone()).map(Arc::new)?
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("body spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("body specs serialize")
    }

    /// Short name of the variant, as used in the JSON `type` tag.
    pub fn kind(&self) -> &'static str {
        match self {
            BodySpec::KOfMHalfspaces { .. } => "k_of_m_halfspaces",
            BodySpec::KOfMPolytopes { .. } => "k_of_m_polytopes",
            BodySpec::Ball { .. } => "ball",
            BodySpec::Cube { .. } => "cube",
            BodySpec::GluedCones { .. } => "glued_cones",
            BodySpec::CliqueReduction { .. } => "clique_reduction",
            BodySpec::Polygon { .. } => "polygon",
            BodySpec::Affine { .. } => "affine",
        }
    }
}

/// Union of `[0,1]²` and `[½,3/2]²` as a 1-of-2 polytope body.
pub fn one_of_two_squares() -> BodySpec {
    let square = |lo: f64, hi: f64| {
        Polytope::new(vec![
            Halfspace::new(vec![1.0, 0.0], hi).unwrap(),
            Halfspace::new(vec![-1.0, 0.0], -lo).unwrap(),
            Halfspace::new(vec![0.0, 1.0], hi).unwrap(),
            Halfspace::new(vec![0.0, -1.0], -lo).unwrap(),
        ])
        .unwrap()
    };
    BodySpec::KOfMPolytopes {
        k: 1,
        polytopes: vec![square(0.0, 1.0), square(0.5, 1.5)],
        witness: Point::new(vec![0.75, 0.75]).unwrap(),
        radius_bound: None,
    }
}
