//! Binary feature files: encode, inspect the header, decode.

use srad::ingest::{decode_features, encode_features, Precision};
use srad::Matrix;

fn main() -> srad::Result<()> {
    let m = Matrix::from_rows(&[vec![0.0, 0.5, -1.25], vec![2.0, 3.5, 1e3]])?;
    for precision in [Precision::Auto, Precision::F64] {
        let bytes = encode_features(&m, precision)?;
        let back = decode_features(&bytes, (Some(2), Some(3)), "example")?;
        println!(
            "{precision:?}: {} bytes, header {:02x?}, round trip exact: {}",
            bytes.len(),
            &bytes[..16],
            back == m
        );
    }

    let third = Matrix::from_rows(&[vec![1.0 / 3.0]])?;
    println!(
        "1/3 needs {} bytes",
        encode_features(&third, Precision::Auto)?.len()
    );

    let mut truncated = encode_features(&m, Precision::Auto)?;
    truncated.pop();
    match decode_features(&truncated, (None, None), "truncated") {
        Ok(_) => println!("unexpectedly decoded"),
        Err(e) => println!("truncated file: {e}"),
    }
    Ok(())
}
