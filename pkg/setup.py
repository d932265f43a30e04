from setuptools import setup, find_packages

setup(
    name="flowrecon",
    version="0.1.0",
    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    install_requires=[
        'numpy>=1.20.0',
        'scipy>=1.7.0',
        'scikit-learn>=0.24.0',
        'pandas>=1.3.0',
        'joblib>=1.0.0',
        'tqdm>=4.62.0'
    ],
    author="Erick Sang",
    description="Reconstrucción de campos de velocidad incompresibles desde sensores dispersos (SCVAE y GPOD)",
    python_requires='>=3.8',
    include_package_data=True,
    entry_points={
        'console_scripts': [
            'flowrecon=src.cli:main',
            'flowrecon-init=config.crear_directorios:crear_estructura_proyecto',
            'flowrecon-clean=config.crear_directorios:limpiar_directorios_temp'
        ]
    }
)
