use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MosaicError;
use crate::geometry::{CameraConfig, CameraIntrinsics, CameraPose, CameraSource, PixelPoint, PlanePoint};
use crate::homography::Homography;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageCamera {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphImage {
    pub id: String,
    pub camera: Option<ImageCamera>,
    /// Explicit image → plane homography; takes precedence over the camera.
    pub homography: Option<Homography>,
    /// Frozen during the solve; fixes the gauge.
    pub anchor: bool,
}

impl GraphImage {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            camera: None,
            homography: None,
            anchor: false,
        }
    }

    pub fn with_camera(mut self, intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        self.camera = Some(ImageCamera { intrinsics, pose });
        self
    }

    pub fn with_homography(mut self, h: Homography) -> Self {
        self.homography = Some(h);
        self
    }

    pub fn anchored(mut self) -> Self {
        self.anchor = true;
        self
    }
}

/// Matches between two images: `(pixel in a, pixel in b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub matches: Vec<(PixelPoint, PixelPoint)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub image: usize,
    pub pixel: PixelPoint,
    pub world: PlanePoint,
}

/// Images, pairwise matches and control points, with ids resolved to
/// indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceGraph {
    pub images: Vec<GraphImage>,
    /// `(index a, index b, matches)`.
    #[allow(clippy::type_complexity)]
    pub edges: Vec<(usize, usize, Vec<(PixelPoint, PixelPoint)>)>,
    pub controls: Vec<Control>,
}

impl CorrespondenceGraph {
    pub fn new(images: Vec<GraphImage>) -> Result<Self, MosaicError> {
        let mut seen = HashMap::new();
        for (i, im) in images.iter().enumerate() {
            if seen.insert(im.id.clone(), i).is_some() {
                return Err(MosaicError::DuplicateImage(im.id.clone()));
            }
        }
        Ok(Self {
            images,
            edges: Vec::new(),
            controls: Vec::new(),
        })
    }

    pub fn index_of(&self, id: &str) -> Result<usize, MosaicError> {
        self.images
            .iter()
            .position(|im| im.id == id)
            .ok_or_else(|| MosaicError::UnknownImage(id.to_owned()))
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), MosaicError> {
        let a = self.index_of(&edge.a)?;
        let b = self.index_of(&edge.b)?;
        if a == b {
            return Err(MosaicError::InvalidGraph(format!("self edge on '{}'", edge.a)));
        }
        if !edge.matches.iter().all(|(p, q)| p.is_finite() && q.is_finite()) {
            return Err(MosaicError::InvalidGraph("non-finite match".into()));
        }
        self.edges.push((a, b, edge.matches));
        Ok(())
    }

    pub fn add_control(&mut self, image: &str, pixel: PixelPoint, world: PlanePoint) -> Result<(), MosaicError> {
        let image = self.index_of(image)?;
        if !(pixel.is_finite() && world.is_finite()) {
            return Err(MosaicError::InvalidGraph("non-finite control point".into()));
        }
        self.controls.push(Control { image, pixel, world });
        Ok(())
    }

    pub fn controls_in(&self, image: usize) -> impl Iterator<Item = &Control> {
        self.controls.iter().filter(move |c| c.image == image)
    }

    pub fn edges_of(&self, id_a: &str, id_b: &str) -> Option<&[(PixelPoint, PixelPoint)]> {
        let (a, b) = (self.index_of(id_a).ok()?, self.index_of(id_b).ok()?);
        self.edges
            .iter()
            .find(|(x, y, _)| *x == a && *y == b)
            .map(|(_, _, m)| m.as_slice())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MosaicError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MosaicError::File(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        GraphFile::from_json(&text)?.into_graph(base)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile::from_graph(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<[f64; 9]>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub anchor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub a: String,
    pub b: String,
    /// `[u1, v1, u2, v2]` rows.
    pub matches: Vec<[f64; 4]>,
}

/// On-disk graph layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub images: Vec<ImageEntry>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    /// `[image_id, u, v, X, Y]` rows.
    #[serde(default)]
    pub controls: Vec<(String, f64, f64, f64, f64)>,
}

impl GraphFile {
    pub fn from_json(text: &str) -> Result<Self, MosaicError> {
        serde_json::from_str(text).map_err(|e| MosaicError::File(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Resolves camera paths relative to `base`.
    pub fn into_graph(self, base: &Path) -> Result<CorrespondenceGraph, MosaicError> {
        let mut images = Vec::with_capacity(self.images.len());
        for entry in self.images {
            let mut im = GraphImage::new(entry.id);
            im.anchor = entry.anchor;
            if let Some(src) = entry.camera {
                let cfg = src
                    .resolve(base)
                    .map_err(|e| MosaicError::File(format!("image '{}': {e}", im.id)))?;
                let (k, pose) = cfg
                    .camera()
                    .map_err(|e| MosaicError::File(format!("image '{}': {e}", im.id)))?;
                im = im.with_camera(k, pose);
            }
            if let Some(h) = entry.homography {
                im = im.with_homography(Homography::from_row_slice(&h)?);
            }
            images.push(im);
        }
        let mut graph = CorrespondenceGraph::new(images)?;
        for e in self.edges {
            let matches = e
                .matches
                .iter()
                .map(|m| (PixelPoint::new(m[0], m[1]), PixelPoint::new(m[2], m[3])))
                .collect();
            graph.add_edge(Edge {
                a: e.a,
                b: e.b,
                matches,
            })?;
        }
        for (id, u, v, x, y) in self.controls {
            graph.add_control(&id, PixelPoint::new(u, v), PlanePoint::new(x, y))?;
        }
        Ok(graph)
    }

    pub fn from_graph(g: &CorrespondenceGraph) -> Self {
        let images = g
            .images
            .iter()
            .map(|im| ImageEntry {
                id: im.id.clone(),
                camera: im
                    .camera
                    .map(|c| CameraSource::Inline(CameraConfig::from_camera(&c.intrinsics, &c.pose))),
                homography: im.homography.map(|h| h.to_row_array()),
                anchor: im.anchor,
            })
            .collect();
        let edges = g
            .edges
            .iter()
            .map(|(a, b, m)| EdgeEntry {
                a: g.images[*a].id.clone(),
                b: g.images[*b].id.clone(),
                matches: m.iter().map(|(p, q)| [p.u, p.v, q.u, q.v]).collect(),
            })
            .collect();
        let controls = g
            .controls
            .iter()
            .map(|c| (g.images[c.image].id.clone(), c.pixel.u, c.pixel.v, c.world.x, c.world.y))
            .collect();
        Self {
            images,
            edges,
            controls,
        }
    }
}
