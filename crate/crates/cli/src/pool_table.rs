//! Pooling of externally computed per-copy estimates.
//!
//! Input is a CSV with columns `copy`, `coefficient`, `estimate`, `se` (any
//! order, extra columns ignored).

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use shrimp_core::pooling::{rubin_pool, PooledEstimate};
use shrimp_core::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGroup {
    pub coefficient: String,
    pub estimates: Vec<f64>,
    pub ses: Vec<f64>,
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Group rows by coefficient in order of first appearance.
pub fn read_pool_table<R: Read>(reader: R) -> Result<Vec<CoefficientGroup>, Error> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(1, format!("header: {e}")))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_error(1, format!("missing column `{name}`")))
    };
    let (c_copy, c_coef, c_est, c_se) = (find("copy")?, find("coefficient")?, find("estimate")?, find("se")?);

    let mut groups: Vec<CoefficientGroup> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let number = |i: usize, what: &str| -> Result<f64, Error> {
            let v: f64 = field(i)
                .parse()
                .map_err(|_| parse_error(line, format!("{what} `{}` is not a number", field(i))))?;
            if !v.is_finite() {
                return Err(parse_error(line, format!("{what} must be finite")));
            }
            Ok(v)
        };
        let copy = field(c_copy).to_string();
        let coef = field(c_coef).to_string();
        if copy.is_empty() || coef.is_empty() {
            return Err(parse_error(line, "empty copy or coefficient"));
        }
        let est = number(c_est, "estimate")?;
        let se = number(c_se, "se")?;
        if se <= 0.0 {
            return Err(parse_error(line, "se must be positive"));
        }
        if !seen.insert((copy.clone(), coef.clone())) {
            return Err(parse_error(line, format!("duplicate row for copy `{copy}`, coefficient `{coef}`")));
        }
        let g = *index.entry(coef.clone()).or_insert_with(|| {
            groups.push(CoefficientGroup {
                coefficient: coef.clone(),
                estimates: Vec::new(),
                ses: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].estimates.push(est);
        groups[g].ses.push(se);
    }
    if groups.is_empty() {
        return Err(Error::Validation("pool table has no rows".into()));
    }
    Ok(groups)
}

pub fn pool_groups(groups: &[CoefficientGroup]) -> Result<Vec<(String, PooledEstimate)>, Error> {
    groups
        .iter()
        .map(|g| {
            if g.estimates.len() < 2 {
                return Err(Error::Validation(format!(
                    "coefficient `{}` has {} copies; pooling needs at least 2",
                    g.coefficient,
                    g.estimates.len()
                )));
            }
            Ok((g.coefficient.clone(), rubin_pool(&g.estimates, &g.ses)?))
        })
        .collect()
}

/// Estimate, SE, 95% CI, two-sided p-value and FMI per coefficient.
pub fn write_pooled<W: Write>(rows: &[(String, PooledEstimate)], w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Validation(format!("writing pooled table: {e}"));
    out.write_record(["coefficient", "estimate", "se", "ci_low", "ci_high", "df", "p_value", "fmi"])
        .map_err(io)?;
    for (name, p) in rows {
        out.write_record([
            name.clone(),
            p.q_bar.to_string(),
            p.se().to_string(),
            p.ci_low.to_string(),
            p.ci_high.to_string(),
            if p.df.is_finite() { p.df.to_string() } else { "Inf".to_string() },
            p.p_value().to_string(),
            p.fmi.to_string(),
        ])
        .map_err(io)?;
    }
    out.flush()
        .map_err(|e| Error::Validation(format!("writing pooled table: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let text = "copy,coefficient,estimate,se\n1,b,1,1\n2,b,3,1\n";
        let groups = read_pool_table(text.as_bytes()).unwrap();
        let pooled = pool_groups(&groups).unwrap();
        assert_eq!(pooled[0].1.q_bar, 2.0);
        assert_eq!(pooled[0].1.se(), 2.0);
    }

    #[test]
    fn constant_estimates_have_zero_fmi() {
        let text = "se,estimate,coefficient,copy\n0.5,1.2,a,1\n0.5,1.2,a,2\n0.5,1.2,a,3\n";
        let pooled = pool_groups(&read_pool_table(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(pooled[0].1.fmi, 0.0);
        let mut buf = Vec::new();
        write_pooled(&pooled, &mut buf).unwrap();
        let out = String::from_utf8(buf).unwrap();
        assert!(out.lines().nth(1).unwrap().contains(",Inf,"));
    }

    #[test]
    fn malformed_rows_report_lines() {
        let text = "copy,coefficient,estimate,se\n1,a,1,1\n2,a,oops,1\n";
        match read_pool_table(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "copy,coefficient,estimate,se\n1,a,1,1\n2,a,1\n";
        assert!(matches!(read_pool_table(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let text = "copy,coefficient,estimate,se\n1,a,1,-1\n";
        assert!(matches!(read_pool_table(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let text = "copy,coefficient,estimate,se\n1,a,1,1\n1,a,2,1\n";
        assert!(matches!(read_pool_table(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_pool_table("copy,estimate,se\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn single_copy_rejected() {
        let text = "copy,coefficient,estimate,se\n1,a,1,1\n1,b,1,1\n2,b,2,1\n";
        let groups = read_pool_table(text.as_bytes()).unwrap();
        assert_eq!(groups.len(), 2);
        assert!(matches!(pool_groups(&groups), Err(Error::Validation(_))));
    }
}
