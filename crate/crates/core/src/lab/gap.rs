//! Stationary-increment gap `(c_hi, c_lo)` of `dt` and `d<B>` integrals.

use crate::error::Result;
use crate::lab::{cell, Check, DataTable, LabId, LabOptions, LabOutcome, LabVerdict, Relation};
use crate::scenario::{integrate_dqv, integrate_dt, SimpleProcess};
use crate::upper::{default_family, gap_report, GapReport};

const N_STEPS: usize = 64;
const N_PATHS: usize = 2000;
const WINDOWS: usize = 4;

/// Gap reports of `<B>`, `∫ 1 ds` and `∫ 1_{s > T/2} ds`, in that order.
pub fn sii_gap_reports(opts: &LabOptions) -> Result<Vec<GapReport>> {
    let setup = opts.setup(N_STEPS, N_PATHS)?;
    let windows = opts.overrides.windows.unwrap_or(WINDOWS);
    let family = default_family(&setup.spec, &setup.grid, None);
    let t = setup.grid.horizon();
    let one = SimpleProcess::constant(t, 1.0)?;
    let late = SimpleProcess::indicator(t, t / 2.0, t)?;
    let one_dt = one.clone();
    Ok(vec![
        gap_report(
            "<B>",
            move |b| integrate_dqv(&one, b),
            windows,
            &family,
            &setup,
        )?,
        gap_report(
            "int 1 ds",
            move |b| integrate_dt(&one_dt, b),
            windows,
            &family,
            &setup,
        )?,
        gap_report(
            "int 1{s>T/2} ds",
            move |b| integrate_dt(&late, b),
            windows,
            &family,
            &setup,
        )?,
    ])
}

pub fn sii_gap(opts: &LabOptions) -> Result<LabOutcome> {
    let setup = opts.setup(N_STEPS, N_PATHS)?;
    let reports = sii_gap_reports(opts)?;
    let spec = &opts.spec;
    let mut table = DataTable::new(&[
        "process",
        "start",
        "end",
        "upper_rate",
        "upper_se",
        "lower_rate",
        "lower_se",
    ]);
    for r in &reports {
        table.push(vec![
            r.process.clone(),
            cell(0.0),
            cell(setup.grid.horizon()),
            cell(r.c_hi),
            cell(r.c_hi_se),
            cell(r.c_lo),
            cell(r.c_lo_se),
        ]);
        for w in &r.windows {
            table.push(vec![
                r.process.clone(),
                cell(w.start),
                cell(w.end),
                cell(w.upper),
                cell(w.upper_se),
                cell(w.lower),
                cell(w.lower_se),
            ]);
        }
    }
    let (qv, dt, late) = (&reports[0], &reports[1], &reports[2]);
    let mut checks = vec![
        Check::new(
            "<B> c_hi",
            qv.c_hi,
            qv.c_hi_se,
            Relation::Equal,
            spec.sigma_hi_sq(),
        ),
        Check::new(
            "<B> c_lo",
            qv.c_lo,
            qv.c_lo_se,
            Relation::Equal,
            spec.sigma_lo_sq(),
        ),
        Check::flag("<B> stationary", qv.stationary),
        Check::new("dt c_hi", dt.c_hi, dt.c_hi_se, Relation::Equal, 1.0),
        Check::new("dt c_lo", dt.c_lo, dt.c_lo_se, Relation::Equal, 1.0),
        Check::flag("dt stationary", dt.stationary),
        Check::flag("late indicator rejected as stationary", !late.stationary),
    ];
    for r in &reports {
        checks.push(Check::flag(
            format!("{} c_hi >= c_lo", r.process),
            r.ordered(),
        ));
    }
    let verdict = LabVerdict::new(
        LabId::SiiGap,
        "upper and lower increment rates per unit time are window independent \
         for processes with stationary increments",
        opts.seed,
        opts.profile(&setup),
        checks,
    );
    Ok(LabOutcome { verdict, table })
}
