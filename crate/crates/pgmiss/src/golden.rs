//! Shipped example graphs used across the test suites and the docs.

use crate::graph::{builtin_graph, pat, BuiltinGraph, Pattern, PatternGraph};

/// Acyclic, non-regular two-variable graph: 11 -> 00, 00 -> 10, 11 -> 01.
/// Identifies the same full-data law as [`fig_b1_g2`].
pub fn fig_b1_g1() -> PatternGraph {
    PatternGraph::from_edges(
        2,
        &[(pat("11"), pat("00")), (pat("00"), pat("10")), (pat("11"), pat("01"))],
    )
    .unwrap()
}

/// The regular member of the first equivalence pair: the CCMV star on d=2.
pub fn fig_b1_g2() -> PatternGraph {
    builtin_graph(BuiltinGraph::Ccmv, &Pattern::all(2)).unwrap()
}

/// Acyclic chain 11 -> 10 -> 00 -> 01 with an ascending tail edge.
/// Equivalent to [`fig_b1_g4`]; no regular graph identifies this law.
pub fn fig_b1_g3() -> PatternGraph {
    PatternGraph::from_edges(
        2,
        &[(pat("11"), pat("10")), (pat("10"), pat("00")), (pat("00"), pat("01"))],
    )
    .unwrap()
}

/// The image of [`fig_b1_g3`] under the equivalence move with s=10, r=01.
pub fn fig_b1_g4() -> PatternGraph {
    PatternGraph::from_edges(
        2,
        &[(pat("11"), pat("10")), (pat("10"), pat("00")), (pat("10"), pat("01"))],
    )
    .unwrap()
}

/// Seven-pattern four-variable graph where the equivalence move can relocate
/// the single arrow into 0111 to originate from 0011 or from 1111.
pub fn fig_b2_left() -> PatternGraph {
    PatternGraph::from_edges(
        4,
        &[
            (pat("1111"), pat("0011")),
            (pat("0011"), pat("0101")),
            (pat("0101"), pat("0111")),
            (pat("1111"), pat("1110")),
            (pat("1111"), pat("1100")),
            (pat("1111"), pat("1000")),
        ],
    )
    .unwrap()
}

/// Survey-response graph: the first question is answered (or skipped) before
/// the second, and skipping both at once is not modelled.
/// Paths: 11->11, 11->10, 11->01, 11->01->00.
pub fn pisa_g1() -> PatternGraph {
    PatternGraph::from_edges(
        2,
        &[(pat("11"), pat("10")), (pat("11"), pat("01")), (pat("01"), pat("00"))],
    )
    .unwrap()
}

/// Like [`pisa_g1`] plus the direct arrow 11 -> 00 for respondents who skip
/// the whole block at once.
pub fn pisa_g2() -> PatternGraph {
    PatternGraph::from_edges(
        2,
        &[
            (pat("11"), pat("10")),
            (pat("11"), pat("01")),
            (pat("01"), pat("00")),
            (pat("11"), pat("00")),
        ],
    )
    .unwrap()
}
