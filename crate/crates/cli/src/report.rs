//! Aggregates verdict and search outputs into one CSV, computing the
//! realized sparsity ratios and checking them against the gap floor the
//! instance parameters promise.

use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use num_integer::Integer;

use crate::{read_json, write_json, Failure, Manifest};

struct Row {
    variant: String,
    n: String,
    m: String,
    s: String,
    s0: String,
    measured_sat: String,
    measured_unsat_min: String,
    ratio: String,
    floor: String,
    floor_violated: String,
}

pub fn run(inputs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    if inputs.is_empty() {
        return Err(Failure::input("report needs at least one verdict or search file"));
    }
    let mut manifest = Manifest::new("report");
    let mut rows = Vec::with_capacity(inputs.len());
    for path in inputs {
        manifest.input_file(path)?;
        rows.push(row_from_file(path)?);
    }

    let header = [
        "variant",
        "n",
        "m",
        "s",
        "s0",
        "measured_sat",
        "measured_unsat_min",
        "ratio",
        "floor",
        "floor_violated",
    ];
    let mut csv = header.join(",");
    csv.push('\n');
    for r in &rows {
        let fields = [
            r.variant.as_str(),
            r.n.as_str(),
            r.m.as_str(),
            r.s.as_str(),
            r.s0.as_str(),
            r.measured_sat.as_str(),
            r.measured_unsat_min.as_str(),
            r.ratio.as_str(),
            r.floor.as_str(),
            r.floor_violated.as_str(),
        ];
        debug_assert!(fields.iter().all(|f| !f.contains(',')));
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    std::fs::create_dir_all(out).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    let csv_path = out.join("report.csv");
    std::fs::write(&csv_path, &csv)
        .map_err(|e| Failure::input(format!("{}: {e}", csv_path.display())))?;
    manifest.output("report.csv");

    let sat = rows.iter().filter(|r| !r.measured_sat.is_empty()).count();
    let violated = rows.iter().filter(|r| r.floor_violated == "yes").count();
    let summary = serde_json::json!({
        "rows": rows.len(),
        "sat_rows": sat,
        "unsat_rows": rows.len() - sat,
        "floor_violations": violated,
    });
    write_json(out, "report-summary.json", &summary)?;
    manifest.output("report-summary.json");
    manifest.write(out)?;
    for r in &rows {
        println!(
            "report: variant={} n={} m={} sat={} unsat_min={} ratio={} floor_violated={}",
            r.variant,
            r.n,
            r.m,
            blank(&r.measured_sat),
            blank(&r.measured_unsat_min),
            blank(&r.ratio),
            blank(&r.floor_violated),
        );
    }
    println!(
        "report: wrote report.csv rows={} sat={} unsat={} floor_violations={}",
        rows.len(),
        sat,
        rows.len() - sat,
        violated
    );
    Ok(())
}

fn blank(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

fn row_from_file(path: &Path) -> Result<Row, Failure> {
    let v = read_json(path)?;
    let fail = |msg: &str| Failure::input(format!("{}: {msg}", path.display()));
    let instance = v
        .get("instance")
        .filter(|i| i.is_object())
        .ok_or_else(|| fail("missing instance summary block"))?;

    // Verdicts carry measured/pass, search results carry min/within_budget.
    let (measured, sat) = if v.get("measured").is_some() && v.get("pass").is_some() {
        (
            v["measured"]
                .as_str()
                .ok_or_else(|| fail("measured is not a string"))?
                .to_string(),
            v["pass"].as_bool().ok_or_else(|| fail("pass is not a bool"))?,
        )
    } else if v.get("min").is_some() && v.get("within_budget").is_some() {
        (
            v["min"]
                .as_str()
                .ok_or_else(|| fail("min is not a string"))?
                .to_string(),
            v["within_budget"]
                .as_bool()
                .ok_or_else(|| fail("within_budget is not a bool"))?,
        )
    } else {
        return Err(fail("neither a verdict (measured/pass) nor a search result (min/within_budget)"));
    };

    let params = &instance["params"];
    let s = params["s"]
        .as_str()
        .ok_or_else(|| fail("params.s missing"))?
        .to_string();
    let s0 = params["s0"].as_str().unwrap_or("").to_string();

    let mut row = Row {
        variant: variant_label(instance)?,
        n: instance["n"].as_u64().map(|x| x.to_string()).unwrap_or_default(),
        m: instance["m"].as_u64().map(|x| x.to_string()).unwrap_or_default(),
        s,
        s0,
        measured_sat: String::new(),
        measured_unsat_min: String::new(),
        ratio: String::new(),
        floor: String::new(),
        floor_violated: String::new(),
    };
    if sat {
        row.measured_sat = measured;
        return Ok(row);
    }
    row.measured_unsat_min = measured.clone();

    // Realized ratio against the satisfiable budget, in lowest terms.
    let min: BigUint = measured
        .parse()
        .map_err(|_| fail("measurement is not an integer"))?;
    let denom_str = if row.s0.is_empty() { &row.s } else { &row.s0 };
    let denom: BigUint = denom_str
        .parse()
        .map_err(|_| fail("budget is not an integer"))?;
    let g = min.gcd(&denom);
    row.ratio = format!("{}/{}", &min / &g, &denom / &g);

    // The gap construction promises unsat measurements of at least
    // (base degree + 1)^3; flag rows where the data contradicts that.
    if !instance["gap"].is_null() {
        let key = match instance["problem"].as_str() {
            Some("setsparse") => "d3",
            _ => "d4",
        };
        if let Some(d) = params[key].as_str() {
            let d: BigUint = d.parse().map_err(|_| fail("base degree is not an integer"))?;
            let floor = (d + 1u32).pow(3);
            row.floor_violated = if min < floor { "yes" } else { "no" }.to_string();
            row.floor = floor.to_string();
        }
    }
    Ok(row)
}

/// Comma-free instance label, e.g. `etsparse+gap(eps=1/4;d=8)/q`.
fn variant_label(instance: &serde_json::Value) -> Result<String, Failure> {
    let mut label = instance["problem"]
        .as_str()
        .ok_or_else(|| Failure::input("instance summary missing problem"))?
        .to_string();
    if instance["translations_hardened"].as_bool() == Some(true) {
        label.push_str("+translations");
    }
    if let Some(gap) = instance["gap"].as_object() {
        let eps = gap
            .get("epsilon")
            .and_then(serde_json::Value::as_str)
            .unwrap_or("?");
        match gap.get("override_base_degree").and_then(serde_json::Value::as_str) {
            Some(d) => label.push_str(&format!("+gap(eps={eps};d={d})")),
            None => label.push_str(&format!("+gap(eps={eps})")),
        }
    }
    if let Some(sigma) = instance["sigma"].as_u64() {
        label.push_str(&format!("+sigma={sigma}"));
    }
    if let Some(field) = instance["field"].as_str() {
        label.push('/');
        label.push_str(field);
    }
    Ok(label)
}
