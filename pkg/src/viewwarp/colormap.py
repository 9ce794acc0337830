"""Fixed 256-entry colormap for heatmap export.

The table is a frozen fixture (dark purple through teal to yellow,
perceptually ordered); exported heatmap PNGs are bit-exact across runs
and platforms because the table is shipped as data, not computed.
"""

from __future__ import annotations

import numpy as np

_TABLE_HEX = (
    "44015444035544045745055845075945085a45095c450b5d450c5e450d60460f"
    "6146106246126346136546146646166747176847186a471a6b471b6c471c6e47"
    "1e6f481f70482171482273482374482575482676472776472877472a78462b79"
    "462c79462d7a462f7b45307c45317c45327d44337e44357e44367f4437804338"
    "81433a81433b82423c83423d84423f8442408541418641428641448740458740"
    "46883f47883f48883e49883e4a893d4b893d4c893d4d893c4e893c4f8a3b508a"
    "3b518a3a538a3a548b39558b39568b38578b38588c37598c375a8c365b8c365c"
    "8c355d8d355e8d355f8d34608d34618d33628d33638d32648d32658d31668d31"
    "678d31688e30698e306a8e2f6b8e2f6c8e2e6d8e2e6e8e2e6f8e2d708e2d718e"
    "2c728e2c738e2b748e2b758e2b768e2a778e2a788e29798e297a8e297b8e287c"
    "8e287d8e287e8e277f8e27808e26818e26828e26838d25848d25858d25868d24"
    "878d24878d24888d23898d238a8d238b8d228c8d228d8d218e8d218f8d21908c"
    "21918c21928c21938c21948b21958b21968b21978a21978a21988a219989219a"
    "89219b89219c88219d88229e88229f8722a08722a18722a28622a28622a38622"
    "a48522a58522a68522a78422a88424a98325aa8226ab8228ac8129ac802aad7f"
    "2cae7f2daf7e2eb07d30b17c31b27c32b37b34b47a35b57936b57838b67839b7"
    "773ab8763bb9753dba753ebb743fbc7341bd7242be7243be7145bf7047c06f49"
    "c16d4bc16c4ec26b50c36a52c46854c46756c56658c6655ac7635cc7625ec861"
    "60c96063c95f65ca5d67cb5c69cc5b6bcc5a6dcd586fce5771cf5673cf5576d0"
    "5478d1527ad1517cd24f7fd34e82d34c84d44a87d4498ad5478cd5458fd64492"
    "d64294d74097d73f99d83d9cd83b9fd93aa1d938a4da36a7da34a9db33acdb31"
    "afdc2fb1dc2eb4dd2cb6dd2ab9de29bcde27bedf26c1df26c3e026c6e026c8e0"
    "26cbe126cde126d0e126d2e226d5e226d7e226dae225dde325dfe325e2e325e4"
    "e425e7e425e9e425ece525eee525f1e525f3e625f6e625f8e625fbe725fde725"
)

TABLE = np.frombuffer(bytes.fromhex("".join(_TABLE_HEX)), dtype=np.uint8).reshape(256, 3)


def apply_colormap(values: np.ndarray, vmin: float | None = None,
                   vmax: float | None = None) -> np.ndarray:
    """Map an HxW float array to HxWx3 uint8 colors through the table.

    Values are normalized to [vmin, vmax] (data range when omitted; a
    constant array maps to the table's bottom entry) and clipped.
    """
    values = np.asarray(values, dtype=np.float64)
    lo = float(values.min()) if vmin is None else float(vmin)
    hi = float(values.max()) if vmax is None else float(vmax)
    if hi <= lo:
        index = np.zeros(values.shape, dtype=np.int64)
    else:
        index = np.clip(np.round((values - lo) / (hi - lo) * 255), 0, 255).astype(np.int64)
    return TABLE[index]
