# Archivo vacío para marcar el directorio como paquete Python 