use ndarray::Array2;

use super::{ClassicalError, Result};

/// Rows of numbers separated by commas, tabs or spaces. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| ClassicalError::Parse { line: i + 1, message };
        let before = values.len();
        for field in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()) {
            let v: f64 = field.parse().map_err(|_| bad(format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        let n = values.len() - before;
        match width {
            None => width = Some(n),
            Some(w) if w != n => return Err(bad(format!("expected {w} columns, found {n}"))),
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or(ClassicalError::Invalid("no rows".into()))?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("row widths checked"))
}

/// Like [`parse_matrix`], with the last column holding a 0/1 label.
pub fn parse_labeled_matrix(text: &str) -> Result<(Array2<f64>, Vec<bool>)> {
    let m = parse_matrix(text)?;
    let d = m.ncols();
    if d < 2 {
        return Err(ClassicalError::Invalid("need at least one feature column and a label column".into()));
    }
    let labels = m
        .column(d - 1)
        .iter()
        .enumerate()
        .map(|(row, &v)| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(ClassicalError::Invalid(format!("row {}: label must be 0 or 1, got {v}", row + 1))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((m.slice(ndarray::s![.., ..d - 1]).to_owned(), labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_separators_and_comments() {
        let m = parse_matrix("# x y\n1, 2\n3\t4\n\n5 6\n").unwrap();
        assert_eq!(m.shape(), &[3, 2]);
        assert_eq!(m[[2, 1]], 6.0);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = parse_matrix("1 2\n3\n").unwrap_err();
        assert!(matches!(err, ClassicalError::Parse { line: 2, .. }));
    }

    #[test]
    fn labels_must_be_binary() {
        assert!(parse_labeled_matrix("0.5 1\n0.2 0\n").is_ok());
        assert!(parse_labeled_matrix("0.5 2\n").is_err());
    }
}
