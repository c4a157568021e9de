"""
MEC Offload - совместная выгрузка вычислений и распределение ресурсов в MEC HetNet
"""

__version__ = "1.0.0"
__author__ = "MEC Offload Team"
