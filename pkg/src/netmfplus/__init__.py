"""Randomized-factorization network embedding (NetMF+) with dense verification oracles."""

from .errors import (GraphFormatError, InputError, NetMFError, NumericalError,
                     RankDeficiencyError, ResourceLimitError, StageError)
from .graph import (CsrGraph, EdgeSet, from_edges, load_csr, load_edge_list, save_csr,
                    split_edges, spmm_modified_laplacian, spmm_norm_laplacian, volume)
from .freigs import EigenPair, approximation_error, freigs
from .sketch import (FactorPair, SparseSignMatrix, build_factor_pair, elementwise_log,
                     gen_sparse_sign, sketch_y, sketch_z)
from .spsvd import SvdResult, embedding_from_svd, single_pass_svd
from .pipeline import (EmbedConfig, Embedding, netmf_plus, preset, spectral_propagate)

__version__ = "0.1.0"
