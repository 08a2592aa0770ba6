"""Writes container and mixing CSV fixtures with numpy only.

Independent of the C++ writer; test_io reads these files back and also
checks that the C++ writer reproduces them byte for byte.
"""
import json
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).parent


def write_container(path, array, dtype, axes, meta):
    header = {"magic": "SPMX1", "dtype": dtype, "order": "C", "dims": list(array.shape),
              "axes": axes, "meta": meta}
    np_dtype = {"f32": "<f4", "u16": "<u2"}[dtype]
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        f.write(np.ascontiguousarray(array, dtype=np_dtype).tobytes(order="C"))


def main():
    c, z, y, x = np.meshgrid(np.arange(3), np.arange(2), np.arange(5), np.arange(4), indexing="ij")
    # Exactly representable in float32 and as u16 after scaling.
    spectral = (c * 1000 + z * 100 + y * 10 + x) * 0.25 - 7.5
    layout = {"bands": [[500.0, 510.0], [510.0, 520.0], [520.0, 530.0]]}
    write_container(HERE / "fixture_spectral_f32.spmx", spectral, "f32",
                    ["L", "Z", "Y", "X"], {"layout": layout})
    write_container(HERE / "fixture_spectral_u16.spmx", (spectral + 7.5) * 4 + 60000, "u16",
                    ["L", "Z", "Y", "X"], {"layout": layout})
    cmap = spectral[:2] * 0.5
    write_container(HERE / "fixture_cmap_f32.spmx", cmap, "f32",
                    ["F", "Z", "Y", "X"], {"labels": ["EGFP", "mScarlet"]})
    m = np.array([[0.5, 0.125], [0.375, 0.25], [0.125, 0.625]])
    rows = ["band_lo_nm,band_hi_nm,EGFP,mScarlet"]
    for (lo, hi), row in zip(layout["bands"], m):
        rows.append(f"{lo:g},{hi:g}," + ",".join(repr(float(v)) for v in row))
    (HERE / "fixture_mixing.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
