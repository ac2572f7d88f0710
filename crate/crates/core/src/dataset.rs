//! CSV persistence for observation records.
//!
//! One row per customer: `customer_id`, the customer schema columns (raw
//! values, one-hot rating), `treatment` in currency and `outcome`.
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::design::TestingDesign;
use crate::domain::{
    CreditRating, CustomerRecord, ObservationRecord, Schema, CUSTOMER_WIDTH, DUMMY_OFFSET, TREATMENT,
};
use crate::error::{Error, Result};

const ID: &str = "customer_id";
const OUTCOME: &str = "outcome";

pub fn header() -> Vec<String> {
    let mut h = vec![ID.to_string()];
    h.extend(Schema::customer().names().iter().cloned());
    h.push(TREATMENT.to_string());
    h.push(OUTCOME.to_string());
    h
}

pub fn write_observations<W: Write>(out: W, rows: &[ObservationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    let mut fields = Vec::with_capacity(CUSTOMER_WIDTH + 3);
    for r in rows {
        fields.clear();
        fields.push(r.customer.customer_id.clone());
        fields.extend(r.customer.raw_values().iter().map(f64::to_string));
        fields.push(r.treatment.to_string());
        fields.push(r.outcome.to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_observations<R: Read>(input: R) -> Result<Vec<ObservationRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let expected = header();
    let found: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if found != expected {
        return Err(Error::InvalidInput(format!(
            "unexpected columns {found:?}, expected {expected:?}"
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let s = &rec[i];
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(&expected[i], format!("row {}: not a number: {s:?}", line + 1)))
        };
        let v: Vec<f64> = (1..rec.len()).map(num).collect::<Result<_>>()?;
        let dummies = &v[DUMMY_OFFSET..CUSTOMER_WIDTH];
        let hot: Vec<usize> = (0..dummies.len()).filter(|&i| dummies[i] == 1.0).collect();
        if hot.len() != 1 || dummies.iter().any(|&d| d != 0.0 && d != 1.0) {
            return Err(Error::invalid(
                "credit_rating",
                format!("row {}: rating columns must be one-hot", line + 1),
            ));
        }
        let customer = CustomerRecord {
            customer_id: rec[0].to_string(),
            prob_default: v[0],
            credit_rating: CreditRating::ALL[hot[0]],
            avg_spend_3m: v[1],
            avg_spend_6m: v[2],
            max_spend_12m: v[3],
            avg_balance_3m: v[4],
            avg_balance_6m: v[5],
            current_limit: v[6],
        };
        let row = ObservationRecord {
            customer,
            treatment: v[CUSTOMER_WIDTH],
            outcome: v[CUSTOMER_WIDTH + 1],
        };
        row.validate()?;
        out.push(row);
    }
    Ok(out)
}

pub fn save(path: &Path, rows: &[ObservationRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_observations(std::io::BufWriter::new(f), rows)
}

pub fn load(path: &Path) -> Result<Vec<ObservationRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_observations(std::io::BufReader::new(f))
}

/// Rejects rows whose treatment is not on their subgroup's menu.
pub fn check_on_menu(rows: &[ObservationRecord], design: &TestingDesign, treatment_unit: f64) -> Result<()> {
    for r in rows {
        let rating = r.customer.credit_rating;
        if !design.contains(rating, r.treatment / treatment_unit) {
            return Err(Error::InvalidDesign(format!(
                "customer {} ({rating}) received off-menu treatment {}",
                r.customer.customer_id, r.treatment
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::default_design;
    use crate::simulator::{build_dataset, SimulationSpec};

    fn sample() -> Vec<ObservationRecord> {
        let spec = SimulationSpec {
            n: 200,
            ..Default::default()
        };
        build_dataset(&spec, &default_design()).unwrap().train
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = sample();
        let mut buf = Vec::new();
        write_observations(&mut buf, &rows).unwrap();
        assert_eq!(read_observations(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_two_hot_rating() {
        let rows = sample();
        let mut buf = Vec::new();
        write_observations(&mut buf, &rows[..1]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
        for c in &mut cells[1 + DUMMY_OFFSET..1 + CUSTOMER_WIDTH] {
            *c = "1".into();
        }
        lines[1] = cells.join(",");
        let err = read_observations(lines.join("\n").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("one-hot"), "{err}");
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_observations("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn on_menu_check() {
        let mut rows = sample();
        check_on_menu(&rows, &default_design(), 1000.0).unwrap();
        rows[0].treatment = 1234.0;
        assert!(matches!(
            check_on_menu(&rows, &default_design(), 1000.0),
            Err(Error::InvalidDesign(_))
        ));
    }
}
