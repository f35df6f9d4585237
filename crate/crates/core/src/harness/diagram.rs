//! Interaction diagrams: a row/bar table, a timeline graphic, and an
//! ethogram with drive traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::contextual::{Initiator, StepKind};
use crate::log::{EventKind, EventLog, Source};
use crate::reactive::{BehaviorKind, DriveKind};

use super::metrics::metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Row {
    TaggingAcquisition,
    PointingExpression,
    TaggingHumanPoints,
    RobotMovesObject,
    AskHumanToMove,
}

impl Row {
    pub const ALL: [Row; 5] = [
        Row::TaggingAcquisition,
        Row::PointingExpression,
        Row::TaggingHumanPoints,
        Row::RobotMovesObject,
        Row::AskHumanToMove,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Row::TaggingAcquisition => "tagging_acquisition",
            Row::PointingExpression => "pointing_expression",
            Row::TaggingHumanPoints => "tagging_human_points",
            Row::RobotMovesObject => "robot_moves_object",
            Row::AskHumanToMove => "ask_human_to_move",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Row::TaggingAcquisition => "Tagging (knowledge acquisition)",
            Row::PointingExpression => "Pointing (knowledge expression)",
            Row::TaggingHumanPoints => "Tagging (human points)",
            Row::RobotMovesObject => "Robot moves object",
            Row::AskHumanToMove => "Ask human to move object",
        }
    }

    fn for_step(step: StepKind) -> Row {
        match step {
            StepKind::PointToLearn => Row::TaggingHumanPoints,
            StepKind::RobotPush | StepKind::RobotPull => Row::RobotMovesObject,
            StepKind::AskPush | StepKind::AskPull => Row::AskHumanToMove,
            StepKind::Point => Row::PointingExpression,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub row: Row,
    pub start_s: f64,
    pub end_s: f64,
    pub activity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagram {
    pub bars: Vec<Bar>,
    pub all_names_known: Option<f64>,
    pub end_s: f64,
}

/// Bars from drive-triggered behaviors and plan steps. Bars still open at
/// the end of the log are closed at the last record.
pub fn bars(log: &EventLog) -> Vec<Bar> {
    let mut open: BTreeMap<(u64, Row), f64> = BTreeMap::new();
    let mut out = Vec::new();
    for r in log.records() {
        match &r.event {
            EventKind::BehaviorStarted {
                activity,
                behavior,
                initiator: Initiator::RobotDrive(_),
                ..
            } => {
                let row = match behavior {
                    BehaviorKind::AcquireInfo => Row::TaggingAcquisition,
                    BehaviorKind::ExpressKnowledge => Row::PointingExpression,
                    _ => continue,
                };
                open.insert((*activity, row), r.time_s);
            }
            EventKind::BehaviorFinished { activity, behavior, .. } => {
                let row = match behavior {
                    BehaviorKind::AcquireInfo => Row::TaggingAcquisition,
                    BehaviorKind::ExpressKnowledge => Row::PointingExpression,
                    _ => continue,
                };
                if let Some(start) = open.remove(&(*activity, row)) {
                    out.push(Bar {
                        row,
                        start_s: start,
                        end_s: r.time_s,
                        activity: *activity,
                    });
                }
            }
            EventKind::PlanStepStarted { activity, step, .. } => {
                open.insert((*activity, Row::for_step(*step)), r.time_s);
            }
            EventKind::PlanStepFinished { activity, step, .. } => {
                let row = Row::for_step(*step);
                if let Some(start) = open.remove(&(*activity, row)) {
                    out.push(Bar {
                        row,
                        start_s: start,
                        end_s: r.time_s,
                        activity: *activity,
                    });
                }
            }
            _ => {}
        }
    }
    let end = log.records().last().map_or(0.0, |r| r.time_s);
    out.extend(open.into_iter().map(|((activity, row), start)| Bar {
        row,
        start_s: start,
        end_s: end,
        activity,
    }));
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.row.cmp(&b.row)));
    out
}

pub fn diagram(log: &EventLog) -> Diagram {
    Diagram {
        bars: bars(log),
        all_names_known: metrics(log).time_all_names_known,
        end_s: log.records().last().map_or(0.0, |r| r.time_s),
    }
}

impl Diagram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,start_s,end_s\n");
        for b in &self.bars {
            let _ = writeln!(s, "{},{:.3},{:.3}", b.row.as_str(), b.start_s, b.end_s);
        }
        s
    }

    pub fn to_svg(&self) -> String {
        const LEFT: f64 = 230.0;
        const ROW_H: f64 = 28.0;
        const WIDTH: f64 = 900.0;
        let span = self.end_s.max(1.0);
        let x = |t: f64| LEFT + (t / span) * (WIDTH - LEFT - 20.0);
        let height = ROW_H * Row::ALL.len() as f64 + 50.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
        );
        for (i, row) in Row::ALL.iter().enumerate() {
            let y = 10.0 + i as f64 * ROW_H;
            let _ = writeln!(s, r#"<text x="5" y="{:.1}">{}</text>"#, y + 17.0, row.title());
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#ddd"/>"##,
                y + ROW_H,
                WIDTH - 20.0,
                y + ROW_H
            );
            for b in self.bars.iter().filter(|b| b.row == *row) {
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#4a7"/>"##,
                    x(b.start_s),
                    y + 4.0,
                    (x(b.end_s) - x(b.start_s)).max(1.0),
                    ROW_H - 8.0
                );
            }
        }
        let axis_y = 10.0 + ROW_H * Row::ALL.len() as f64;
        if let Some(t) = self.all_names_known {
            let _ = writeln!(
                s,
                r##"<line x1="{0:.1}" y1="10" x2="{0:.1}" y2="{1:.1}" stroke="#c33" stroke-dasharray="4 3"/>"##,
                x(t),
                axis_y
            );
        }
        axis(&mut s, span, axis_y, &x);
        s.push_str("</svg>\n");
        s
    }
}

fn axis(s: &mut String, span: f64, y: f64, x: &dyn Fn(f64) -> f64) {
    let step = [1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0, 120.0, 300.0]
        .into_iter()
        .find(|st| span / st <= 12.0)
        .unwrap_or(600.0);
    let mut t = 0.0;
    while t <= span + 1e-9 {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            x(t),
            y + 18.0
        );
        t += step;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}">time (s)</text>"#,
        x(span) - 40.0,
        y + 34.0
    );
}

// ---------------------------------------------------------------------------
// Ethogram
// ---------------------------------------------------------------------------

/// Drive traces over time with the trigger threshold, robot activity
/// intervals (green) and partner turns (red).
pub fn ethogram_svg(log: &EventLog, threshold: f64) -> String {
    const LEFT: f64 = 50.0;
    const WIDTH: f64 = 900.0;
    const PLOT_H: f64 = 220.0;
    let end = log.records().last().map_or(1.0, |r| r.time_s).max(1.0);
    let x = |t: f64| LEFT + (t / end) * (WIDTH - LEFT - 20.0);
    let y = |level: f64| 20.0 + (1.0 - (level / 0.6).min(1.0)) * PLOT_H;
    let mut traces: BTreeMap<DriveKind, Vec<(f64, f64)>> = BTreeMap::new();
    let mut robot: Vec<(f64, f64)> = Vec::new();
    let mut human: Vec<(f64, f64)> = Vec::new();
    let mut started: BTreeMap<u64, f64> = BTreeMap::new();
    for r in log.records() {
        match &r.event {
            EventKind::DriveLevels { levels } => {
                for l in levels {
                    traces.entry(l.drive).or_default().push((r.time_s, l.level));
                }
            }
            EventKind::BehaviorStarted { activity, .. } | EventKind::PlanStarted { activity, .. } => {
                started.insert(*activity, r.time_s);
            }
            EventKind::BehaviorFinished { activity, .. } | EventKind::PlanFinished { activity, .. } => {
                if let Some(s) = started.remove(activity) {
                    robot.push((s, r.time_s));
                }
            }
            EventKind::HumanSpoke { .. }
            | EventKind::HumanPointed { .. }
            | EventKind::HumanTouched { .. }
            | EventKind::HumanActed { .. } => human.push((r.time_s, r.time_s + 0.5)),
            EventKind::ObjectMoved { .. } if r.source == Source::Human => human.push((r.time_s, r.time_s + 0.5)),
            _ => {}
        }
    }
    let height = PLOT_H + 110.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let band = PLOT_H + 30.0;
    for (a, b) in &robot {
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{band:.1}" width="{:.1}" height="14" fill="#4a7"/>"##,
            x(*a),
            (x(*b) - x(*a)).max(1.0)
        );
    }
    for (a, b) in &human {
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="14" fill="#c33"/>"##,
            x(*a),
            band + 18.0,
            (x(*b) - x(*a)).max(1.0)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="#555" stroke-dasharray="6 4"/>"##,
        y(threshold),
        WIDTH - 20.0
    );
    for (kind, pts) in &traces {
        let colour = match kind {
            DriveKind::KnowledgeAcquisition => "#1f5fbf",
            DriveKind::KnowledgeExpression => "#d08000",
        };
        let mut d = String::new();
        for (i, (t, l)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.1},{:.1} ", if i == 0 { "M" } else { "L" }, x(*t), y(*l));
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{LEFT}" y="{:.1}" fill="{colour}">{}</text>"#,
            if *kind == DriveKind::KnowledgeAcquisition {
                14.0
            } else {
                28.0
            },
            kind.as_str()
        );
    }
    axis(&mut s, end, band + 36.0, &x);
    s.push_str("</svg>\n");
    s
}
