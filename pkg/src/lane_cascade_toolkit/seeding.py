"""ルートシードから用途別のシードを導出する"""

import numpy as np

# 乱数を使うサブシステム。それぞれ独立に再現できる
SUBSYSTEMS: tuple[str, ...] = ("data", "seg_init", "loss_sampling", "cls_init")


def derive_seed(base: int, *keys: int | str) -> int:
    """
    base と任意個のキーから決定的に32bitシードを導出

    文字列キーはUTF-8のバイト列をそのままエントロピーに加える。
    """
    entropy: list[int] = [int(base) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            entropy.extend(key.encode("utf-8"))
        else:
            entropy.append(int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def subsystem_seeds(root_seed: int) -> dict[str, int]:
    """SUBSYSTEMS ごとのシード"""
    return {name: derive_seed(root_seed, name) for name in SUBSYSTEMS}
