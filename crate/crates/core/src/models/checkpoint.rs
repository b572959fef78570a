//! Saving and loading trained generators.

use std::path::Path;

use super::netspec::NetSpec;
use super::network::Autoencoder;
use super::spatial::SpatialAae;
use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_records, module_records, read_records, write_records, Record};
use crate::nn::{Module, Scalar};

pub fn save_module<T: Scalar, M: Module<T> + ?Sized>(path: &Path, module: &M) -> Result<()> {
    write_records(path, &module_records(module))
}

fn infer_spec(records: &[Record], prefix: &str, path: &Path) -> Result<NetSpec> {
    let name = format!("{prefix}conv1_1.weight");
    let r = records
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::GeometryMismatch(format!("{}: no tensor named {name}", path.display())))?;
    if r.dims.len() != 4 {
        return Err(Error::GeometryMismatch(format!("{}: {name} has dims {:?}", path.display(), r.dims)));
    }
    NetSpec::new(r.dims[1], r.dims[0])
}

/// Load a single autoencoder; the network shape comes from the stored tensors.
pub fn load_autoencoder<T: Scalar>(path: &Path) -> Result<Autoencoder<T>> {
    let records = read_records(path)?;
    let spec = infer_spec(&records, "", path)?;
    let mut ae = Autoencoder::new(spec, 0)?;
    load_records(&mut ae, &records)?;
    Ok(ae)
}

pub fn load_spatial<T: Scalar>(path: &Path) -> Result<SpatialAae<T>> {
    let records = read_records(path)?;
    let spec = infer_spec(&records, "g1.", path)?;
    if spec.in_channels != 3 {
        return Err(Error::GeometryMismatch(format!(
            "{}: spatial model needs 3 input channels, found {}",
            path.display(),
            spec.in_channels
        )));
    }
    let mut m = SpatialAae::new(spec.base, 0)?;
    load_records(&mut m, &records)?;
    Ok(m)
}

/// Fail with `geometry_mismatch` unless `ae` takes `in_channels` inputs.
pub fn expect_channels<T: Scalar>(ae: &Autoencoder<T>, in_channels: usize, what: &str) -> Result<()> {
    if ae.spec().in_channels != in_channels {
        return Err(Error::GeometryMismatch(format!(
            "{what} needs a {in_channels}-channel network, checkpoint has {}",
            ae.spec().in_channels
        )));
    }
    Ok(())
}
