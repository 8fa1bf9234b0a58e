"""
qrke_lab
切比雪夫多项式密钥交换的密码分析工作台
"""

__version__ = "0.1.0"
