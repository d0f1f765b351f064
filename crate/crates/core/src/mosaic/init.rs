use std::collections::{BTreeMap, VecDeque};

use super::{CorrespondenceGraph, MosaicError};
use crate::homography::{bev_from_camera, estimate_dlt, metric_rectify, Correspondence, Homography, RansacConfig};

/// Matches needed before chaining switches from plain DLT to RANSAC.
const RANSAC_MIN_MATCHES: usize = 8;

/// Checks anchors, connectivity and gauge. Returns the anchor index.
pub(crate) fn check_structure(g: &CorrespondenceGraph) -> Result<Option<usize>, MosaicError> {
    if g.images.is_empty() {
        return Err(MosaicError::InvalidGraph("no images".into()));
    }
    let anchors: Vec<usize> = (0..g.images.len()).filter(|&i| g.images[i].anchor).collect();
    if anchors.len() > 1 {
        return Err(MosaicError::InvalidGraph(format!(
            "{} anchors declared, at most one allowed",
            anchors.len()
        )));
    }

    let n = g.images.len();
    let mut adj = vec![Vec::new(); n];
    for (a, b, m) in &g.edges {
        if !m.is_empty() {
            adj[*a].push(*b);
            adj[*b].push(*a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(MosaicError::SolveDisconnected(format!(
            "image '{}' is not connected to '{}'",
            g.images[i].id, g.images[0].id
        )));
    }

    let controlled = (0..n).any(|i| g.controls_in(i).count() >= 4);
    if anchors.is_empty() && !controlled {
        return Err(MosaicError::NoGauge(
            "no anchor image and no image with 4 or more control points".into(),
        ));
    }
    Ok(anchors.first().copied())
}

fn direct(g: &CorrespondenceGraph, i: usize) -> Result<Option<Homography>, MosaicError> {
    let im = &g.images[i];
    if let Some(h) = im.homography {
        return Ok(Some(h));
    }
    if let Some(cam) = im.camera {
        return Ok(Some(bev_from_camera(&cam.intrinsics, &cam.pose, 1.0)?));
    }
    let pts: Vec<_> = g.controls_in(i).map(|c| (c.pixel, c.world)).collect();
    if pts.len() >= 4 {
        return Ok(Some(metric_rectify(&pts, None)?.0));
    }
    Ok(None)
}

/// Pairwise homography taking pixels of `from` to pixels of `to`.
fn pairwise(g: &CorrespondenceGraph, edge: usize, to: usize) -> Option<Homography> {
    let (a, _, matches) = &g.edges[edge];
    if matches.len() < 4 {
        return None;
    }
    let corrs: Vec<_> = matches
        .iter()
        .map(|&(p, q)| {
            if *a == to {
                Correspondence::to_pixel(q, p)
            } else {
                Correspondence::to_pixel(p, q)
            }
        })
        .collect();
    let robust = RansacConfig::default();
    let cfg = (corrs.len() >= RANSAC_MIN_MATCHES).then_some(&robust);
    estimate_dlt(&corrs, cfg).ok().map(|(h, _)| h)
}

/// Initial homographies indexed like `g.images`.
pub(crate) fn initialize_indexed(g: &CorrespondenceGraph) -> Result<Vec<Homography>, MosaicError> {
    let anchor = check_structure(g)?;
    let n = g.images.len();
    let mut init: Vec<Option<Homography>> = Vec::with_capacity(n);
    for i in 0..n {
        init.push(direct(g, i)?);
    }
    if let Some(a) = anchor {
        if init[a].is_none() {
            return Err(MosaicError::NoGauge(format!(
                "anchor '{}' has no homography, camera or controls",
                g.images[a].id
            )));
        }
    }

    // breadth-first chaining from every directly initialized image
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| init[i].is_some()).collect();
    while let Some(i) = queue.pop_front() {
        let hi = init[i].expect("queued images are initialized");
        for (e, (a, b, _)) in g.edges.iter().enumerate() {
            let other = if *a == i {
                *b
            } else if *b == i {
                *a
            } else {
                continue;
            };
            if init[other].is_some() {
                continue;
            }
            if let Some(h) = pairwise(g, e, i).and_then(|h| hi.compose(&h).ok()) {
                init[other] = Some(h);
                queue.push_back(other);
            }
        }
    }

    init.into_iter()
        .enumerate()
        .map(|(i, h)| {
            h.ok_or_else(|| {
                MosaicError::SolveDisconnected(format!(
                    "image '{}' cannot be reached through edges with 4 or more matches",
                    g.images[i].id
                ))
            })
        })
        .collect()
}

/// Coarse image → plane homographies: explicit homography, then the
/// camera's bird's-eye view, then control points, then chained pairwise
/// estimates.
pub fn initialize(g: &CorrespondenceGraph) -> Result<BTreeMap<String, Homography>, MosaicError> {
    let hs = initialize_indexed(g)?;
    Ok(g.images.iter().map(|im| im.id.clone()).zip(hs).collect())
}
