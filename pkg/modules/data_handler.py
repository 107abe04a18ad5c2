""" Module for reading and writing result tables, field snapshots and run manifests.

"""
import os
import glob
import json
import datetime
import meshio
import pandas as pd
import numpy as np


def save_table(df, file_path=None, name='results'):
    """ Save a result table as CSV.

    The table carries no date or index column, so repeated runs give identical files.

    Parameters
    ----------
    df : `pandas.DataFrame`, required
        Table to be saved.
    file_path : `str`
        Where file is stored.
        If not specified, the file will be automatically numbered and saved in `data/`.
    name : `str`
        Base name used for the automatically numbered file.

    Return
    -------
    file_path : `str`
        Path of the written file.
    """
    if file_path is None:
        file_path = os.path.join(generate_dirname(), '{}.csv'.format(name))
    _make_parent(file_path)
    df.to_csv(file_path, index=False, float_format='%.12g')
    print("Saved the table to {} .".format(file_path))
    return file_path


def load_table(file_path):
    """ Load a table saved by `save_table`.

    Parameters
    ----------
    file_path : `str`, required
        Where to load the file.

    Returns
    -------
    `pandas.DataFrame`
    """
    return pd.read_csv(file_path)


def save_vtk(file_path, grid, fields, binary=False):
    """ Save cell fields as a legacy VTK file on a hexahedral mesh of the grid.

    Parameters
    ----------
    file_path : `str`, required
        Where file is stored.
    grid : `Grid`, required
        Grid of the fields.
    fields : `dict`, required
        Name-array pairs. Scalar and integer label fields have the grid shape,
        vector fields an extra trailing axis of length 3.
    binary : `bool`
        Write binary instead of ASCII data.
    """
    _make_parent(file_path)
    n = grid.n
    nodes = np.meshgrid(*[grid.lower[k] + grid.spacing[k]*np.arange(n[k] + 1) for k in range(3)], indexing='ij')
    points = np.stack(nodes, axis=-1).reshape(-1, 3)
    idx = np.arange(len(points)).reshape(tuple(k + 1 for k in n))
    lo, hi = slice(None, -1), slice(1, None)
    # corners of every cell, bottom face first, counterclockwise
    corners = [idx[lo, lo, lo], idx[hi, lo, lo], idx[hi, hi, lo], idx[lo, hi, lo],
               idx[lo, lo, hi], idx[hi, lo, hi], idx[hi, hi, hi], idx[lo, hi, hi]]
    cells = np.stack([c.ravel() for c in corners], axis=-1)
    count = len(cells)
    data = {}
    for name, values in fields.items():
        values = np.asarray(values)
        data[name] = [values.reshape(count, 3) if values.ndim == 4 else values.reshape(count)]
    mesh = meshio.Mesh(points, [('hexahedron', cells)], cell_data=data)
    meshio.write(file_path, mesh, file_format='vtk', binary=binary)
    print("Saved the snapshot to {} .".format(file_path))


def save_manifest(file_path, config: dict, version: str):
    """ Save the resolved configuration of a run together with the library version.
    """
    _make_parent(file_path)
    with open(file_path, mode='w') as f:
        json.dump({'version': version, 'config': config}, f, indent=2, sort_keys=True)
        f.write('\n')
    print("Saved the manifest to {} .".format(file_path))


def load_manifest(file_path):
    """ Load a configuration file or a manifest written by `save_manifest`.

    Returns
    -------
    `dict`
        The configuration (the 'config' entry of a manifest).
    """
    with open(file_path) as f:
        data = json.load(f)
    if isinstance(data, dict) and 'config' in data and 'version' in data:
        return data['config']
    return data


def generate_dirname(directory='data'):
    """ Automatically generates unique directory name that include relative path.
    This prevents overwriting of already existing results, etc.

    Parameters
    ----------
    directory : `str`
        Relative path of the parent directory.

    Return
    -------
    dirname : `str`
        Directory name containing relative path.
    """
    timestamp = datetime.datetime.now()
    dirs = [os.path.basename(p) for p in glob.glob('{}/*'.format(directory)) if os.path.isdir(p)]
    tag = timestamp.strftime('%y%m%d')
    i = 0
    while '{}_{}'.format(tag, i) in dirs: i+=1
    return '{}/{}_{}'.format(directory, tag, i)


def _make_parent(file_path):
    parent = os.path.dirname(file_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
