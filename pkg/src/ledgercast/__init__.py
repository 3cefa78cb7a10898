"""Weekly collections forecasting from invoices and support data."""
