//! Fixed-format MPS export and a plain-text instance dump.
//!
//! The file minimizes; the model's maximization objective is encoded by
//! negating the coefficients, noted in a header comment. Binaries sit
//! inside an INTORG/INTEND marker pair with explicit unit bounds so that
//! importing solvers do not fall back on format defaults.

use std::io::Write;
use std::path::Path;

use crate::lp::{Model, RowSense};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("model has no variables or rows; nothing to export")]
    EmptyModel,
    #[error("name '{0}' exceeds the 8-character fixed-format field")]
    NameTooLong(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const OBJ_NAME: &str = "PROFIT";

fn field(name: &str) -> Result<String, MpsError> {
    if name.len() > 8 {
        return Err(MpsError::NameTooLong(name.to_string()));
    }
    Ok(format!("{name:<8}"))
}

fn value12(v: f64) -> String {
    let s = format!("{v:.6E}");
    if s.len() <= 12 {
        format!("{s:>12}")
    } else {
        format!("{:>12}", format!("{v:.4E}"))
    }
}

/// Write `model` as fixed-format MPS text.
pub fn write_mps<W: Write>(model: &Model, name: &str, out: &mut W) -> Result<(), MpsError> {
    if model.vars.is_empty() || model.rows.is_empty() {
        return Err(MpsError::EmptyModel);
    }
    writeln!(out, "* Objective sense: MAXIMIZE")?;
    writeln!(
        out,
        "* Coefficients of row {OBJ_NAME} are negated; minimizing this file"
    )?;
    writeln!(out, "* reproduces the original maximization problem.")?;
    writeln!(out, "NAME          {name}")?;

    writeln!(out, "ROWS")?;
    writeln!(out, " N  {OBJ_NAME}")?;
    for row in &model.rows {
        let tag = match row.sense {
            RowSense::Le => "L",
            RowSense::Eq => "E",
            RowSense::Ge => "G",
        };
        writeln!(out, " {}  {}", tag, field(&row.name)?)?;
    }

    // Column-major entries: objective first, then each row coefficient.
    let mut col_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.vars.len()];
    for (r, row) in model.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            col_rows[j].push((r, a));
        }
    }

    writeln!(out, "COLUMNS")?;
    let mut in_integer_block = false;
    let mut marker_id = 0usize;
    for (j, var) in model.vars.iter().enumerate() {
        let is_int = var.kind == crate::lp::VarKind::Binary;
        if is_int != in_integer_block {
            marker_id += 1;
            let kind = if is_int { "'INTORG'" } else { "'INTEND'" };
            writeln!(
                out,
                "    {:<8}  {:<8}  {}",
                format!("MARK{marker_id:04}"),
                "'MARKER'",
                kind
            )?;
            in_integer_block = is_int;
        }
        let cname = field(&var.name)?;
        if var.objective != 0.0 {
            writeln!(
                out,
                "    {}  {}  {}",
                cname,
                field(OBJ_NAME)?,
                value12(-var.objective)
            )?;
        }
        for &(r, a) in &col_rows[j] {
            writeln!(
                out,
                "    {}  {}  {}",
                cname,
                field(&model.rows[r].name)?,
                value12(a)
            )?;
        }
    }
    if in_integer_block {
        marker_id += 1;
        writeln!(
            out,
            "    {:<8}  {:<8}  {}",
            format!("MARK{marker_id:04}"),
            "'MARKER'",
            "'INTEND'"
        )?;
    }

    writeln!(out, "RHS")?;
    for row in &model.rows {
        if row.rhs != 0.0 {
            writeln!(
                out,
                "    {}  {}  {}",
                field("RHS")?,
                field(&row.name)?,
                value12(row.rhs)
            )?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for var in &model.vars {
        let cname = field(&var.name)?;
        if var.lower.is_finite() {
            writeln!(out, " LO {}  {}  {}", field("BND")?, cname, value12(var.lower))?;
        } else {
            writeln!(out, " MI {}  {}", field("BND")?, cname)?;
        }
        if var.upper.is_finite() {
            writeln!(out, " UP {}  {}  {}", field("BND")?, cname, value12(var.upper))?;
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}

/// Export a model to an `.mps` file.
pub fn export_mps(model: &Model, name: &str, path: &Path) -> Result<(), MpsError> {
    let mut buf = Vec::new();
    write_mps(model, name, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Human-readable instance listing for debugging: every variable with its
/// bounds and objective, every row with its terms.
pub fn write_debug_dump<W: Write>(model: &Model, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "maximize")?;
    for v in &model.vars {
        if v.objective != 0.0 {
            writeln!(out, "  {:+} {}", v.objective, v.name)?;
        }
    }
    writeln!(out, "subject to")?;
    for row in &model.rows {
        let mut terms = String::new();
        for &(j, a) in &row.coeffs {
            terms.push_str(&format!(" {:+} {}", a, model.vars[j].name));
        }
        let sense = match row.sense {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        };
        writeln!(out, "  {}:{} {} {}", row.name, terms, sense, row.rhs)?;
    }
    writeln!(out, "bounds")?;
    for v in &model.vars {
        let kind = match v.kind {
            crate::lp::VarKind::Binary => " binary",
            crate::lp::VarKind::Continuous => "",
        };
        writeln!(out, "  {} <= {} <= {}{}", v.lower, v.name, v.upper, kind)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Model, VarKind};

    fn tiny_model() -> Model {
        let mut m = Model::default();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 4.0, 3.0);
        let b = m.add_var("b", VarKind::Binary, 0.0, 1.0, -2.5);
        m.add_row("r0", vec![(x, 1.0), (b, 2.0)], RowSense::Le, 5.0);
        m.add_row("r1", vec![(x, 1.0)], RowSense::Eq, 2.0);
        m
    }

    #[test]
    fn sections_present_and_sense_negated() {
        let mut buf = Vec::new();
        write_mps(&tiny_model(), "TINY", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for section in ["ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.contains(section), "missing section {section}");
        }
        assert!(text.contains("'INTORG'") && text.contains("'INTEND'"));
        // Objective coefficient of x is 3.0, stored negated.
        assert!(text.contains("-3.000000E0"), "text:\n{text}");
        assert!(text.contains("MAXIMIZE"));
    }

    #[test]
    fn empty_model_is_an_error() {
        let m = Model::default();
        assert!(matches!(
            write_mps(&m, "E", &mut Vec::new()),
            Err(MpsError::EmptyModel)
        ));
    }

    #[test]
    fn long_names_are_rejected() {
        let mut m = tiny_model();
        m.vars[0].name = "averylongname".into();
        assert!(matches!(
            write_mps(&m, "T", &mut Vec::new()),
            Err(MpsError::NameTooLong(_))
        ));
    }

    #[test]
    fn debug_dump_lists_all_rows() {
        let mut buf = Vec::new();
        write_debug_dump(&tiny_model(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("r0:") && text.contains("r1:"));
    }
}
