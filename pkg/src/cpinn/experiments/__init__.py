from .problems import FunctionModel, ManufacturedProblem, SumModel, manufactured

__all__ = ["FunctionModel", "ManufacturedProblem", "SumModel", "manufactured"]
