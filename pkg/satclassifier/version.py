# Autogenerated by setup.py
version = '0.1.0'
githash = ''
