//! Column-oriented files shared by the profile writers: NetCDF classic, or
//! a JSON document with the same dimension, variable and attribute names.
//! Readers detect the format from the leading bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use netcdf3::{DataSet, DataType, FileReader, FileWriter, Version};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JSON_FORMAT: &str = "ro-columns/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    NetCdf,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Column {
    pub dims: Vec<String>,
    /// Stored as 32-bit integers in NetCDF.
    #[serde(default)]
    pub integer: bool,
    #[serde(with = "nan_as_null")]
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct ColumnFile {
    pub dimensions: BTreeMap<String, usize>,
    pub global_attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub numeric_attributes: BTreeMap<String, f64>,
    pub variables: BTreeMap<String, Column>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct JsonDoc {
    format: String,
    #[serde(flatten)]
    body: ColumnFile,
}

impl ColumnFile {
    pub fn add(&mut self, name: &str, dims: &[&str], data: Vec<f64>) {
        self.variables.insert(
            name.to_string(),
            Column {
                dims: dims.iter().map(|d| d.to_string()).collect(),
                integer: false,
                data,
            },
        );
    }

    pub fn add_int(&mut self, name: &str, dims: &[&str], data: Vec<f64>) {
        self.add(name, dims, data);
        if let Some(c) = self.variables.get_mut(name) {
            c.integer = true;
        }
    }

    pub fn attr(&self, name: &str) -> Result<&str> {
        self.global_attributes
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing global attribute `{name}`")))
    }

    pub fn num_attr(&self, name: &str) -> Result<f64> {
        self.numeric_attributes
            .get(name)
            .copied()
            .ok_or_else(|| Error::Format(format!("missing global attribute `{name}`")))
    }

    /// Removes a variable, checking it has one value per cell of its dimensions.
    pub fn take(&mut self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .variables
            .remove(name)
            .ok_or_else(|| Error::MissingVariable(name.to_string()))?;
        let want: usize = col
            .dims
            .iter()
            .map(|d| self.dimensions.get(d).copied().unwrap_or(0))
            .product();
        if col.data.len() != want {
            return Err(Error::Format(format!(
                "variable `{name}` has {} values, expected {want}",
                col.data.len()
            )));
        }
        Ok(col.data)
    }

    /// Writes to `path` through a sibling temporary file; an existing file is replaced.
    pub fn write(&self, path: &Path, format: ExportFormat) -> Result<()> {
        let tmp = path.with_extension("partial");
        let _ = fs::remove_file(&tmp);
        let written = match format {
            ExportFormat::NetCdf => self.write_netcdf(&tmp),
            ExportFormat::Json => self.write_json(&tmp),
        };
        if let Err(e) = written {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"CDF") {
            Self::read_netcdf(path)
        } else {
            let doc: JsonDoc = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            if doc.format != JSON_FORMAT {
                return Err(Error::Format(format!(
                    "unsupported column format `{}`",
                    doc.format
                )));
            }
            Ok(doc.body)
        }
    }

    fn write_json(&self, path: &Path) -> Result<()> {
        let doc = JsonDoc {
            format: JSON_FORMAT.into(),
            body: self.clone(),
        };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn write_netcdf(&self, path: &Path) -> Result<()> {
        let mut ds = DataSet::new();
        for (name, &len) in &self.dimensions {
            ds.add_fixed_dim(name, len).map_err(nc_err)?;
        }
        for (name, col) in &self.variables {
            if col.integer {
                ds.add_var_i32(name, &col.dims)
            } else {
                ds.add_var_f64(name, &col.dims)
            }
            .map_err(nc_err)?;
        }
        for (k, v) in &self.global_attributes {
            ds.add_global_attr_string(k, v).map_err(nc_err)?;
        }
        for (k, &v) in &self.numeric_attributes {
            ds.add_global_attr_f64(k, vec![v]).map_err(nc_err)?;
        }
        let mut w = FileWriter::create_new(path).map_err(nc_err)?;
        w.set_def(&ds, Version::Classic, 0).map_err(nc_err)?;
        for (name, col) in &self.variables {
            if col.integer {
                let ints: Vec<i32> = col.data.iter().map(|&v| v as i32).collect();
                w.write_var_i32(name, &ints)
            } else {
                w.write_var_f64(name, &col.data)
            }
            .map_err(nc_err)?;
        }
        w.close().map_err(nc_err)
    }

    fn read_netcdf(path: &Path) -> Result<Self> {
        let mut r = FileReader::open(path).map_err(nc_err)?;
        let mut out = ColumnFile::default();
        let ds = r.data_set();
        for d in ds.get_dims() {
            out.dimensions.insert(d.name().to_string(), d.size());
        }
        for attr in ds.get_global_attrs() {
            let name = attr.name();
            if let Some(v) = ds.get_global_attr_f64(name).and_then(|v| v.first()) {
                out.numeric_attributes.insert(name.to_string(), *v);
            } else if let Some(s) = ds.get_global_attr_as_string(name) {
                out.global_attributes.insert(name.to_string(), s);
            }
        }
        let vars: Vec<(String, Vec<String>, DataType)> = ds
            .get_vars()
            .iter()
            .map(|v| (v.name().to_string(), v.dim_names(), v.data_type()))
            .collect();
        for (name, dims, dtype) in vars {
            let data = r.read_var(&name).map_err(nc_err)?;
            let (integer, values) = match dtype {
                DataType::F64 => (false, data.get_f64().map(<[f64]>::to_vec)),
                DataType::I32 => (
                    true,
                    data.get_i32()
                        .map(|v| v.iter().map(|&x| x as f64).collect()),
                ),
                _ => (false, None),
            };
            let data = values.ok_or_else(|| {
                Error::Format(format!("variable `{name}` has an unsupported type"))
            })?;
            out.variables.insert(
                name,
                Column {
                    dims,
                    integer,
                    data,
                },
            );
        }
        Ok(out)
    }
}

fn nc_err(e: impl std::fmt::Debug) -> Error {
    Error::Format(format!("netcdf: {e:?}"))
}
