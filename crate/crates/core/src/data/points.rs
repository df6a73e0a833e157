//! Point clouds as CSV: header `x1,...,xd[,label]`.

use std::io::{Read, Write};

use super::PointCloud;
use crate::error::{Error, Result};

const FMT: &str = "point cloud csv";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(FMT, format!("{other:?}")),
    }
}

pub fn write_point_cloud<W: Write>(cloud: &PointCloud, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = cloud.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    if cloud.labels.is_some() {
        header.push("label".into());
    }
    out.write_record(&header).map_err(csv_err)?;
    for i in 0..cloud.len() {
        let mut row: Vec<String> = cloud.features.point(i).iter().map(|v| format!("{v:e}")).collect();
        if let Some(l) = &cloud.labels {
            row.push(l[i].to_string());
        }
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_point_cloud<R: Read>(r: R) -> Result<PointCloud> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let has_label = header.iter().last() == Some("label");
    let d = header.len() - usize::from(has_label);
    if d == 0 {
        return Err(Error::format(FMT, "no coordinate columns"));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for j in 0..d {
            let v: f64 = rec[j]
                .trim()
                .parse()
                .map_err(|_| Error::format(FMT, format!("row {}: bad value {:?}", line + 1, &rec[j])))?;
            data.push(v);
        }
        if has_label {
            let l: i8 = rec[d]
                .trim()
                .parse()
                .ok()
                .filter(|l| *l == 1 || *l == -1)
                .ok_or_else(|| Error::format(FMT, format!("row {}: label must be +1 or -1", line + 1)))?;
            labels.push(l);
        }
    }
    if data.is_empty() {
        return Err(Error::format(FMT, "no rows"));
    }
    PointCloud::new(d, data, has_label.then_some(labels))
}
