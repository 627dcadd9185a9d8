//! Bundled example programs.

use crate::frontend::{parse_program, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub source: &'static str,
    /// Post-expectation the program is usually studied with.
    pub post: &'static str,
    /// A grid of initial states that exercises it.
    pub states: &'static str,
}

impl CorpusEntry {
    pub fn program(&self) -> Program {
        parse_program(self.source).expect("bundled programs parse")
    }
}

pub const CORPUS: [CorpusEntry; 8] = [
    CorpusEntry {
        name: "tortoise_hare",
        summary: "race between a tortoise with a lead of 30 and a jumping hare",
        source: include_str!("../corpus/tortoise_hare.pgcl"),
        post: "h - t",
        states: "t=0,h=0",
    },
    CorpusEntry {
        name: "trunc",
        summary: "truncated geometric distribution, loop-free",
        source: include_str!("../corpus/trunc.pgcl"),
        post: "x",
        states: "x=-3..3",
    },
    CorpusEntry {
        name: "alttrunc",
        summary: "truncated alternating geometric distribution, mixed-sign outcome",
        source: include_str!("../corpus/alttrunc.pgcl"),
        post: "x",
        states: "x=-3..3",
    },
    CorpusEntry {
        name: "amortized_op",
        summary: "potential change of an amortized operation, negative in expectation",
        source: include_str!("../corpus/amortized_op.pgcl"),
        post: "F",
        states: "F=-2..2",
    },
    CorpusEntry {
        name: "geo",
        summary: "geometric distribution with non-integrable mixed-sign posts",
        source: include_str!("../corpus/geo.pgcl"),
        post: "pow(-2, x)",
        states: "x=0",
    },
    CorpusEntry {
        name: "parity_geo",
        summary: "geometric variant with a parity-dependent probabilistic guard",
        source: include_str!("../corpus/parity_geo.pgcl"),
        post: "x",
        states: "x=0..3",
    },
    CorpusEntry {
        name: "kozen",
        summary: "Kozen's random walk with a round counter",
        source: include_str!("../corpus/kozen.pgcl"),
        post: "c",
        states: "n=0..5,x=0,c=0",
    },
    CorpusEntry {
        name: "sign_walk",
        summary: "walk that negates x and moves it away from 0 each round",
        source: include_str!("../corpus/sign_walk.pgcl"),
        post: "x",
        states: "x=-3..3",
    },
];

pub fn lookup(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}
