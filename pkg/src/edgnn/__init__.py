"""edGNN: directed edge-labelled Weisfeiler-Lehman refinement and message passing."""
from .graph import (Graph, GraphError, LabelDict, build_graph, edge_histogram, neighborhood,
                    permute, reverse_augment, disjoint_union)
from .wl import (Coloring, RefinementResult, Verdict, initial_coloring, wl_step,
                 refine_to_stable, wl_isomorphism_test, color_histogram, partition_refines)
from .model import (EdGNNLayer, EdGNNModel, EdgeEmbeddingTable, ModelConfig, Batch,
                    init_node_features, precompute_edge_sums, layer_forward,
                    layer_forward_concat, graph_readout)

__version__ = "0.1.0"
