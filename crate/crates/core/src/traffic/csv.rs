//! Trace CSV: header `flow_id,priority,arrival,length`.
//!
//! `arrival` is an exact fraction `p/q` or a decimal string (converted
//! exactly); `length` is a positive integer. Packet indices are assigned
//! per flow in file order.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::{PacketRecord, PacketTrace, TraceError};
use crate::rational::{fmt_q, parse_rational};

pub const TRACE_HEADER: [&str; 4] = ["flow_id", "priority", "arrival", "length"];

fn csv_error(e: csv::Error) -> TraceError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    TraceError::Csv {
        line,
        msg: e.to_string(),
    }
}

pub fn read_trace(reader: impl Read) -> Result<PacketTrace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(TraceError::Csv {
            line: 1,
            msg: format!(
                "expected header `{}`, found `{}`",
                TRACE_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut next_index: HashMap<String, u64> = HashMap::new();
    let mut packets = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |msg: String| TraceError::Csv { line, msg };
        let flow_id = record[0].to_string();
        let priority: u32 = record[1].parse().map_err(|_| {
            err(format!(
                "priority `{}` is not a nonnegative integer",
                &record[1]
            ))
        })?;
        let arrival = parse_rational(&record[2]).map_err(|e| err(e.to_string()))?;
        let length: u64 = record[3]
            .parse()
            .ok()
            .filter(|l| *l >= 1)
            .ok_or_else(|| err(format!("length `{}` is not a positive integer", &record[3])))?;
        let index = next_index.entry(flow_id.clone()).or_insert(0);
        *index += 1;
        packets.push(PacketRecord {
            index: *index,
            arrival,
            length,
            flow_id,
            priority,
        });
    }
    PacketTrace::new(packets).map_err(|e| TraceError::Csv {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn write_trace(writer: impl Write, trace: &PacketTrace) -> Result<(), TraceError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TRACE_HEADER).map_err(csv_error)?;
    for p in trace {
        wtr.write_record([
            p.flow_id.clone(),
            p.priority.to_string(),
            fmt_q(&p.arrival),
            p.length.to_string(),
        ])
        .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}
