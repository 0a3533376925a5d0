//! LibSVM text format: `<label> <idx>:<val> <idx>:<val> ...`, one sample per
//! line, 1-based strictly increasing indices. Text after `#` is ignored.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::{normalize_labels, DatasetError, LabelEncoding, ParseErrorKind, SparseDataset};

/// Line-at-a-time parser so callers can feed any text source.
#[derive(Debug, Default)]
pub struct LibsvmParser {
    line: usize,
    max_index: usize,
    row_ptr: Vec<usize>,
    entries: Vec<(usize, f64)>,
    labels: Vec<f64>,
}

impl LibsvmParser {
    pub fn new() -> Self {
        LibsvmParser { row_ptr: alloc::vec![0], ..Default::default() }
    }

    pub fn push_line(&mut self, line: &str) -> Result<(), DatasetError> {
        self.line += 1;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label_tok) = tokens.next() else {
            return Ok(());
        };
        let err = |kind| DatasetError::Parse { line: self.line, kind };
        let label: f64 = label_tok
            .parse()
            .ok()
            .filter(|y: &f64| y.is_finite())
            .ok_or_else(|| err(ParseErrorKind::MalformedLabel(label_tok.to_string())))?;

        let start = self.entries.len();
        let mut prev = 0usize;
        for tok in tokens {
            let parsed = tok.split_once(':').and_then(|(i, v)| {
                let i: usize = i.parse().ok()?;
                let v: f64 = v.parse().ok()?;
                (i >= 1).then_some((i, v))
            });
            let Some((idx, val)) = parsed else {
                self.entries.truncate(start);
                return Err(err(ParseErrorKind::MalformedToken(tok.to_string())));
            };
            if idx <= prev {
                self.entries.truncate(start);
                let kind = if idx == prev {
                    ParseErrorKind::DuplicateIndex(idx)
                } else {
                    ParseErrorKind::NonAscendingIndex { previous: prev, found: idx }
                };
                return Err(err(kind));
            }
            prev = idx;
            self.entries.push((idx - 1, val));
        }
        self.max_index = self.max_index.max(prev);
        self.labels.push(label);
        self.row_ptr.push(self.entries.len());
        Ok(())
    }

    pub fn finish(self, enc: LabelEncoding) -> Result<SparseDataset, DatasetError> {
        let labels = normalize_labels(&self.labels, enc)?;
        let mut ds = SparseDataset::empty(self.max_index);
        for (i, y) in labels.into_iter().enumerate() {
            let row = &self.entries[self.row_ptr[i]..self.row_ptr[i + 1]];
            ds.push_row(row.iter().copied(), y)?;
        }
        Ok(ds)
    }
}

/// Parses LibSVM text. `cols` is the largest index seen.
pub fn parse_libsvm(text: &str, enc: LabelEncoding) -> Result<SparseDataset, DatasetError> {
    let mut parser = LibsvmParser::new();
    for line in text.lines() {
        parser.push_line(line)?;
    }
    parser.finish(enc)
}

/// Serializes to LibSVM text. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn to_libsvm(ds: &SparseDataset) -> String {
    let mut out = String::new();
    for i in 0..ds.rows() {
        let _ = write!(out, "{}", ds.label(i));
        let (idx, val) = ds.row(i);
        for (&j, v) in idx.iter().zip(val) {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let ds = parse_libsvm("+1 1:0.5 3:-2.0", LabelEncoding::PlusMinusOne).unwrap();
        assert_eq!(ds.rows(), 1);
        assert_eq!(ds.cols(), 3);
        assert_eq!(ds.label(0), 1.0);
        assert_eq!(ds.row(0), (&[0usize, 2][..], &[0.5, -2.0][..]));
    }

    #[test]
    fn empty_stream() {
        let ds = parse_libsvm("", LabelEncoding::PlusMinusOne).unwrap();
        assert_eq!((ds.rows(), ds.cols()), (0, 0));
        let ds = parse_libsvm("\n  \n", LabelEncoding::ZeroOne).unwrap();
        assert_eq!((ds.rows(), ds.cols()), (0, 0));
    }

    #[test]
    fn labels_mapped_to_requested_pair() {
        let text = "2 1:1\n1 2:1\n2 3:1 # comment\n";
        let pm = parse_libsvm(text, LabelEncoding::PlusMinusOne).unwrap();
        assert_eq!(pm.labels(), &[1.0, -1.0, 1.0]);
        let zo = parse_libsvm(text, LabelEncoding::ZeroOne).unwrap();
        assert_eq!(zo.labels(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("1 1:0.5\n1 2:x\n", 2, ParseErrorKind::MalformedToken("2:x".into())),
            ("1 1:1\n\n-1 3:1 2:1\n", 3, ParseErrorKind::NonAscendingIndex { previous: 3, found: 2 }),
            ("1 2:1 2:3\n", 1, ParseErrorKind::DuplicateIndex(2)),
            ("abc 1:1\n", 1, ParseErrorKind::MalformedLabel("abc".into())),
            ("1 0:1\n", 1, ParseErrorKind::MalformedToken("0:1".into())),
            ("1 7\n", 1, ParseErrorKind::MalformedToken("7".into())),
        ];
        for (text, line, kind) in cases {
            assert_eq!(
                parse_libsvm(text, LabelEncoding::PlusMinusOne),
                Err(DatasetError::Parse { line, kind })
            );
        }
    }

    #[test]
    fn serialize_format() {
        let ds = SparseDataset::from_rows(3, &[vec![(0, 0.5), (2, -2.0)], vec![]], &[1.0, -1.0]).unwrap();
        assert_eq!(to_libsvm(&ds), "1 1:0.5 3:-2\n-1\n");
    }

    fn arb_dataset() -> impl Strategy<Value = SparseDataset> {
        (1usize..12, 0usize..20).prop_flat_map(|(cols, rows)| {
            let row = proptest::collection::btree_map(0..cols, -1e6f64..1e6, 0..=cols)
                .prop_map(|m| m.into_iter().collect::<Vec<_>>());
            (
                Just(cols),
                proptest::collection::vec(row, rows),
                proptest::collection::vec(prop_oneof![Just(-1.0), Just(1.0)], rows),
            )
                .prop_map(|(cols, rows, labels)| {
                    SparseDataset::from_rows(cols, &rows, &labels).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip(ds in arb_dataset()) {
            let text = to_libsvm(&ds);
            let back = parse_libsvm(&text, LabelEncoding::PlusMinusOne).unwrap().widen(ds.cols());
            prop_assert_eq!(back, ds);
        }
    }
}
