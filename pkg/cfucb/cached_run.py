from __future__ import print_function

import hashlib
import json
import os
import os.path as osp
import shutil
import sys
import tempfile

import filelock

from . import __version__

cache_root_default = osp.join(osp.expanduser("~"), ".cache/cfucb")


def calculate_md5sum(file_path, block_size=65536):
    """Hex MD5 digest of a file, read ``block_size`` bytes at a time."""
    digest = hashlib.md5()
    with open(file_path, "rb") as f:
        while True:
            chunk = f.read(block_size)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def validate_md5sum(file_path, expected_md5, block_size=65536):
    if not (isinstance(expected_md5, str) and len(expected_md5) == 32):
        raise ValueError(
            "Expected MD5 must be 32 characters long: {}".format(expected_md5)
        )

    actual_md5 = calculate_md5sum(file_path, block_size)
    if actual_md5 == expected_md5:
        return True

    raise AssertionError(
        "MD5 mismatch:\nActual: {}\nExpected: {}".format(actual_md5, expected_md5)
    )


def cache_key(config_dict, seed):
    """MD5 of the canonical JSON of a replication's inputs."""
    payload = json.dumps(
        {"config": config_dict, "seed": seed, "version": __version__},
        sort_keys=True,
    )
    return hashlib.md5(payload.encode("utf-8")).hexdigest()


def cached_replication(config_dict, seed, compute, cache_root=None, quiet=False):
    """Return a replication's result from the cache, computing it on a miss.

    Parameters
    ----------
    config_dict: dict
        Experiment config as a plain dict; part of the cache key.
    seed: int
        Replication seed; part of the cache key.
    compute: callable
        Called without arguments on a miss; returns a JSON-serializable
        dict.
    cache_root: str, optional
        Cache directory. Default is ``~/.cache/cfucb``.
    quiet: bool
        Suppress terminal output. Default is False.

    Returns
    -------
    result: dict
        Cached or freshly computed result.
    """
    if cache_root is None:
        cache_root = cache_root_default
    if not osp.exists(cache_root):
        try:
            os.makedirs(cache_root)
        except OSError:
            pass

    key = cache_key(config_dict, seed)
    file_path = osp.join(cache_root, "{}.json".format(key))
    md5_path = file_path + ".md5"

    if osp.exists(file_path) and osp.exists(md5_path):
        with open(md5_path) as f:
            expected_md5 = f.read().strip()
        try:
            validate_md5sum(file_path, expected_md5)
            if not quiet:
                print("Replication cache hit: {}".format(file_path), file=sys.stderr)
            with open(file_path) as f:
                return json.load(f)
        except (AssertionError, ValueError) as e:
            # Display a warning and recompute if the entry is corrupted
            print(e, file=sys.stderr)

    result = compute()

    lock_path = osp.join(cache_root, "_cache_lock")
    temp_root = tempfile.mkdtemp(dir=cache_root)
    try:
        temp_file_path = osp.join(temp_root, "result.json")
        with open(temp_file_path, "w") as f:
            json.dump(result, f, allow_nan=False)
        md5 = calculate_md5sum(temp_file_path)
        with filelock.FileLock(lock_path):
            shutil.move(temp_file_path, file_path)
            with open(md5_path, "w") as f:
                f.write(md5)
    finally:
        shutil.rmtree(temp_root, ignore_errors=True)

    return result
