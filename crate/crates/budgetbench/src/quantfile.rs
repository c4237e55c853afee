//! Persistence of quantized layers: each layer becomes three tensors in a
//! safetensors file (`{name}.codes`, `{name}.scales`, `{name}.zero_points`)
//! plus a JSON sidecar recording the grid parameters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::{QuantGrid, QuantizedLayer};
use crate::tensorio::{load_safetensors, save_safetensors, Tensor};

/// Grid and method parameters shared by every layer in one output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantSidecar {
    pub bits: u8,
    pub symmetric: bool,
    pub block_size: usize,
    pub damping_frac: f64,
    /// "gptq" or "rtn".
    pub method: String,
    pub layers: Vec<String>,
}

pub fn sidecar_path(tensors_path: &Path) -> PathBuf {
    let mut s = tensors_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes quantized layers and their sidecar next to `path`.
pub fn write_quantized(
    path: &Path,
    layers: &BTreeMap<String, QuantizedLayer>,
    sidecar: &QuantSidecar,
) -> Result<()> {
    let mut tensors = BTreeMap::new();
    for (name, layer) in layers {
        let shape = vec![layer.rows, layer.cols];
        let codes = if layer.grid.bits == 4 {
            let vals: Vec<i8> = layer.codes.iter().map(|&c| c as i8).collect();
            Tensor::from_i8(shape.clone(), &vals)?
        } else {
            Tensor::from_i32(shape.clone(), &layer.codes)?
        };
        tensors.insert(format!("{name}.codes"), codes);
        tensors.insert(
            format!("{name}.scales"),
            Tensor::from_f64(vec![layer.rows], &layer.grid.scale)?,
        );
        tensors.insert(
            format!("{name}.zero_points"),
            Tensor::from_i32(vec![layer.rows], &layer.grid.zero_point)?,
        );
    }
    save_safetensors(path, &tensors)?;
    let json = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(sidecar_path(path), json).map_err(|e| Error::io(sidecar_path(path), e))?;
    Ok(())
}

/// Reads quantized layers back, reconstructing each grid from the tensors
/// and the sidecar.
pub fn read_quantized(path: &Path) -> Result<(BTreeMap<String, QuantizedLayer>, QuantSidecar)> {
    let sc_path = sidecar_path(path);
    let sidecar_text =
        std::fs::read_to_string(&sc_path).map_err(|e| Error::io(&sc_path, e))?;
    let sidecar: QuantSidecar = serde_json::from_str(&sidecar_text)?;
    let tensors = load_safetensors(path)?;

    let mut layers = BTreeMap::new();
    for name in &sidecar.layers {
        let codes_t = tensors
            .get(&format!("{name}.codes"))
            .ok_or_else(|| Error::TensorFormat(format!("missing {name}.codes")))?;
        let scales_t = tensors
            .get(&format!("{name}.scales"))
            .ok_or_else(|| Error::TensorFormat(format!("missing {name}.scales")))?;
        let zps_t = tensors
            .get(&format!("{name}.zero_points"))
            .ok_or_else(|| Error::TensorFormat(format!("missing {name}.zero_points")))?;
        if codes_t.shape.len() != 2 {
            return Err(Error::TensorFormat(format!("{name}.codes must be 2-D")));
        }
        let grid = QuantGrid {
            bits: sidecar.bits,
            symmetric: sidecar.symmetric,
            scale: scales_t.to_f64(),
            zero_point: zps_t.to_i32()?,
        };
        layers.insert(
            name.clone(),
            QuantizedLayer {
                rows: codes_t.shape[0],
                cols: codes_t.shape[1],
                codes: codes_t.to_i32()?,
                grid,
            },
        );
    }
    Ok((layers, sidecar))
}
