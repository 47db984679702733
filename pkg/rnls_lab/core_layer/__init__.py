# Lab layers
