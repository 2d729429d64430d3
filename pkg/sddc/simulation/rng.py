"""
可复现的随机数源。

每条蒙特卡洛路径使用由 (种子, 路径编号) 派生的独立 Philox 生成器，
结果与线程划分方式无关。
"""
import numpy as np

from sddc.exceptions import ValidationError

SEED_MAX = 2 ** 64 - 1


def check_seed(seed: int) -> int:
    """检查种子是否为 64 位无符号整数

    Raises:
        ValidationError: 种子越界或类型错误时抛出
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError("种子必须是整数", seed=repr(seed))
    if not 0 <= int(seed) <= SEED_MAX:
        raise ValidationError("种子必须位于 [0, 2^64 - 1]", seed=int(seed))
    return int(seed)


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(check_seed(seed))))


def path_generator(seed: int, index: int) -> np.random.Generator:
    """第 index 条路径的生成器"""
    sequence = np.random.SeedSequence(check_seed(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(sequence))


def categorical(rng: np.random.Generator, probs: np.ndarray) -> int:
    """按离散分布 probs 抽取一个下标（逆累积分布法）"""
    cumulative = np.cumsum(probs)
    index = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
    return min(index, len(probs) - 1)
